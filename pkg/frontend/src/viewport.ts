// Zoom/pan math for the scan canvas. Pure functions so the invariants
// (zoom bounds, image never fully leaving the viewport) are unit-testable.

export const MIN_ZOOM = 0.25
export const MAX_ZOOM = 8
// pixels of the image that must stay visible along each axis
const KEEP_VISIBLE = 24

export interface Viewport {
  zoom: number
  panX: number
  panY: number
}

export interface Size {
  width: number
  height: number
}

export function initialViewport (image: Size, view: Size): Viewport {
  const zoom = clampZoom(Math.min(view.width / image.width, view.height / image.height))
  return clampPan({
    zoom,
    panX: (view.width - image.width * zoom) / 2,
    panY: (view.height - image.height * zoom) / 2
  }, image, view)
}

export function clampZoom (zoom: number): number {
  return Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, zoom))
}

/** Keep at least KEEP_VISIBLE image pixels inside the view on both axes. */
export function clampPan (vp: Viewport, image: Size, view: Size): Viewport {
  const w = image.width * vp.zoom
  const h = image.height * vp.zoom
  const keepX = Math.min(KEEP_VISIBLE, w)
  const keepY = Math.min(KEEP_VISIBLE, h)
  return {
    zoom: vp.zoom,
    panX: Math.min(view.width - keepX, Math.max(keepX - w, vp.panX)),
    panY: Math.min(view.height - keepY, Math.max(keepY - h, vp.panY))
  }
}

/** Zoom by `factor` about the view-space point (cx, cy). */
export function zoomAt (
  vp: Viewport, factor: number, cx: number, cy: number, image: Size, view: Size
): Viewport {
  const zoom = clampZoom(vp.zoom * factor)
  const scale = zoom / vp.zoom
  // keep the image point under the cursor fixed
  return clampPan({
    zoom,
    panX: cx - (cx - vp.panX) * scale,
    panY: cy - (cy - vp.panY) * scale
  }, image, view)
}

export function panBy (
  vp: Viewport, dx: number, dy: number, image: Size, view: Size
): Viewport {
  return clampPan({ zoom: vp.zoom, panX: vp.panX + dx, panY: vp.panY + dy }, image, view)
}
