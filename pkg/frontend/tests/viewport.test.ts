import { describe, expect, it } from 'vitest'

import {
  MAX_ZOOM, MIN_ZOOM, clampPan, initialViewport, panBy, zoomAt, type Size
} from '../src/viewport.js'

const image: Size = { width: 280, height: 32 }
const view: Size = { width: 800, height: 240 }

describe('zoom bounds', () => {
  it('never exceeds 8x or drops below 0.25x', () => {
    let vp = initialViewport(image, view)
    for (let i = 0; i < 50; i++) {
      vp = zoomAt(vp, 1.9, 100, 100, image, view)
      expect(vp.zoom).toBeLessThanOrEqual(MAX_ZOOM)
    }
    expect(vp.zoom).toBe(MAX_ZOOM)
    for (let i = 0; i < 80; i++) {
      vp = zoomAt(vp, 0.55, 100, 100, image, view)
      expect(vp.zoom).toBeGreaterThanOrEqual(MIN_ZOOM)
    }
    expect(vp.zoom).toBe(MIN_ZOOM)
  })

  it('zoom-in then equal zoom-out restores the viewport within rounding', () => {
    const start = initialViewport(image, view)
    const zoomed = zoomAt(start, 2.0, 150, 60, image, view)
    const back = zoomAt(zoomed, 0.5, 150, 60, image, view)
    expect(back.zoom).toBeCloseTo(start.zoom, 10)
    expect(back.panX).toBeCloseTo(start.panX, 8)
    expect(back.panY).toBeCloseTo(start.panY, 8)
  })

  it('keeps the image point under the cursor fixed while zooming', () => {
    const vp = initialViewport(image, view)
    const cx = 300
    const cy = 100
    const imagePointBefore = (cx - vp.panX) / vp.zoom
    const zoomed = zoomAt(vp, 1.5, cx, cy, image, view)
    const imagePointAfter = (cx - zoomed.panX) / zoomed.zoom
    expect(imagePointAfter).toBeCloseTo(imagePointBefore, 8)
  })
})

describe('pan clamping', () => {
  it('image never fully leaves the viewport to the right or bottom', () => {
    let vp = initialViewport(image, view)
    for (let i = 0; i < 100; i++) {
      vp = panBy(vp, 500, 500, image, view)
    }
    expect(vp.panX).toBeLessThanOrEqual(view.width)
    expect(vp.panY).toBeLessThanOrEqual(view.height)
    // some of the image still intersects the view
    expect(vp.panX).toBeLessThan(view.width)
    expect(vp.panY).toBeLessThan(view.height)
  })

  it('image never fully leaves to the left or top', () => {
    let vp = initialViewport(image, view)
    for (let i = 0; i < 100; i++) {
      vp = panBy(vp, -500, -500, image, view)
    }
    expect(vp.panX + image.width * vp.zoom).toBeGreaterThan(0)
    expect(vp.panY + image.height * vp.zoom).toBeGreaterThan(0)
  })

  it('clampPan is a no-op for an in-bounds viewport', () => {
    const vp = { zoom: 1, panX: 40, panY: 40 }
    expect(clampPan(vp, image, view)).toEqual(vp)
  })

  it('normal panning inside bounds is unconstrained', () => {
    const vp = initialViewport(image, view)
    const moved = panBy(vp, 10, -5, image, view)
    expect(moved.panX).toBeCloseTo(vp.panX + 10, 10)
    expect(moved.panY).toBeCloseTo(vp.panY - 5, 10)
    expect(moved.zoom).toBe(vp.zoom)
  })
})
