import { recognizeBoth } from './api.js'
import { sha256Hex } from './digest.js'
import { render, type PageElements } from './render.js'
import {
  initialState, requestFailed, responseArrived, uploadStarted, viewportChanged,
  type ViewState
} from './state.js'
import { initialViewport, panBy, zoomAt, type Size } from './viewport.js'

const BASE_URL = ''

let state: ViewState = initialState()
let imageSize: Size | null = null
let lastFile: File | null = null

function el (id: string): HTMLElement {
  const node = document.getElementById(id)
  if (node === null) throw new Error(`missing element #${id}`)
  return node
}

function panelElements (prefix: string) {
  return {
    root: el(`${prefix}-panel`),
    text: el(`${prefix}-text`),
    badge: el(`${prefix}-badge`),
    chars: el(`${prefix}-chars`),
    meta: el(`${prefix}-meta`)
  }
}

function setState (next: ViewState): void {
  state = next
  render(state, page)
  drawCanvas()
}

let page: PageElements
let canvas: HTMLCanvasElement
let image: HTMLImageElement | null = null

function viewSize (): Size {
  return { width: canvas.clientWidth || 800, height: canvas.clientHeight || 240 }
}

function drawCanvas (): void {
  const ctx = canvas.getContext('2d')
  if (ctx === null) return
  const { width, height } = viewSize()
  canvas.width = width
  canvas.height = height
  ctx.clearRect(0, 0, width, height)
  if (image === null || state.viewport === null) return
  const vp = state.viewport
  ctx.imageSmoothingEnabled = vp.zoom < 2
  ctx.setTransform(vp.zoom, 0, 0, vp.zoom, vp.panX, vp.panY)
  ctx.drawImage(image, 0, 0)
  ctx.setTransform(1, 0, 0, 1, 0, 0)
}

async function submit (file: File): Promise<void> {
  lastFile = file
  const data = await file.arrayBuffer()
  const digest = await sha256Hex(data)
  const url = URL.createObjectURL(file)

  const img = new Image()
  img.onload = () => {
    image = img
    imageSize = { width: img.naturalWidth, height: img.naturalHeight }
    setState(viewportChanged(state, initialViewport(imageSize, viewSize())))
  }
  img.src = url

  setState(uploadStarted(state, digest, url))
  try {
    const response = await recognizeBoth(BASE_URL, file)
    setState(responseArrived(state, response))
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err)
    setState(requestFailed(state, digest, message))
  }
}

function wireEvents (): void {
  const input = el('file-input') as HTMLInputElement
  input.addEventListener('change', () => {
    const file = input.files?.[0]
    if (file !== undefined) void submit(file)
  })
  el('retry').addEventListener('click', () => {
    if (lastFile !== null) void submit(lastFile)
  })

  canvas.addEventListener('wheel', event => {
    if (imageSize === null || state.viewport === null) return
    event.preventDefault()
    const rect = canvas.getBoundingClientRect()
    const factor = Math.exp(-event.deltaY * 0.0015)
    setState(viewportChanged(state, zoomAt(
      state.viewport, factor,
      event.clientX - rect.left, event.clientY - rect.top,
      imageSize, viewSize()
    )))
  }, { passive: false })

  let dragging = false
  let last = { x: 0, y: 0 }
  canvas.addEventListener('pointerdown', event => {
    dragging = true
    last = { x: event.clientX, y: event.clientY }
    canvas.setPointerCapture(event.pointerId)
  })
  canvas.addEventListener('pointermove', event => {
    if (!dragging || imageSize === null || state.viewport === null) return
    const dx = event.clientX - last.x
    const dy = event.clientY - last.y
    last = { x: event.clientX, y: event.clientY }
    setState(viewportChanged(state, panBy(state.viewport, dx, dy, imageSize, viewSize())))
  })
  canvas.addEventListener('pointerup', () => { dragging = false })
  window.addEventListener('resize', drawCanvas)
}

export function start (): void {
  page = {
    baseline: panelElements('baseline'),
    finetuned: panelElements('finetuned'),
    errorBanner: el('error-banner'),
    statusLine: el('status-line')
  }
  canvas = el('scan-canvas') as HTMLCanvasElement
  wireEvents()
  render(state, page)
}

if (typeof document !== 'undefined' && document.getElementById('scan-canvas') !== null) {
  start()
}
