// DOM rendering driven purely by ViewState: given the same state snapshot,
// the panels come out identical.

import { confidencePercent, confidenceTone, type ViewState } from './state.js'
import type { ModelResult } from './types.js'

export interface PanelElements {
  root: HTMLElement
  text: HTMLElement
  badge: HTMLElement
  chars: HTMLElement
  meta: HTMLElement
}

export interface PageElements {
  baseline: PanelElements
  finetuned: PanelElements
  errorBanner: HTMLElement
  statusLine: HTMLElement
}

function renderPanel (panel: PanelElements, result: ModelResult | undefined): void {
  if (result === undefined) {
    panel.root.classList.add('empty')
    panel.text.textContent = ''
    panel.badge.textContent = ''
    panel.badge.className = 'badge'
    panel.chars.replaceChildren()
    panel.meta.textContent = ''
    return
  }
  panel.root.classList.remove('empty')
  panel.text.textContent = result.text === '' ? '(no text recognized)' : result.text
  panel.badge.textContent = confidencePercent(result.confidence)
  panel.badge.className = `badge badge-${confidenceTone(result.confidence)}`

  const spans = result.per_char.map(({ ch, p }) => {
    const span = document.createElement('span')
    span.className = 'char'
    span.textContent = ch
    span.title = confidencePercent(p)
    // stronger ink for stronger probability
    span.style.backgroundColor = `rgba(46, 160, 67, ${(0.12 + 0.55 * Math.min(1, Math.max(0, p))).toFixed(3)})`
    return span
  })
  panel.chars.replaceChildren(...spans)
  const extras = [`${result.elapsed_ms.toFixed(0)} ms`]
  if (result.aspect_broken) extras.push('aspect ratio squeezed')
  panel.meta.textContent = extras.join(' · ')
}

export function render (state: ViewState, page: PageElements): void {
  page.errorBanner.hidden = state.status !== 'error'
  page.errorBanner.textContent = state.error ?? ''
  switch (state.status) {
    case 'idle':
      page.statusLine.textContent = 'Upload a text-line image to compare the models.'
      break
    case 'loading':
      page.statusLine.textContent = 'Recognizing…'
      break
    case 'done':
      page.statusLine.textContent = state.digest === null ? '' : `input ${state.digest.slice(0, 12)}`
      break
    case 'error':
      page.statusLine.textContent = 'Recognition failed; you can retry.'
      break
  }
  renderPanel(page.baseline, state.results?.baseline)
  renderPanel(page.finetuned, state.results?.finetuned)
}
