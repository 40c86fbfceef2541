// Single source of truth for the page. Rendering is a pure function of this
// state; responses are only accepted when their input digest matches the
// image currently shown, so a late answer for a replaced upload is dropped.

import type { ModelResult, RecognizeResponse } from './types.js'
import type { Viewport } from './viewport.js'

export type RequestStatus = 'idle' | 'loading' | 'done' | 'error'

export interface ViewState {
  digest: string | null
  imageUrl: string | null
  status: RequestStatus
  error: string | null
  results: { baseline?: ModelResult, finetuned?: ModelResult } | null
  viewport: Viewport | null
}

export function initialState (): ViewState {
  return {
    digest: null,
    imageUrl: null,
    status: 'idle',
    error: null,
    results: null,
    viewport: null
  }
}

/** A new file was chosen: the old results and errors no longer apply. */
export function uploadStarted (state: ViewState, digest: string, imageUrl: string): ViewState {
  return {
    ...state,
    digest,
    imageUrl,
    status: 'loading',
    error: null,
    results: null
  }
}

/** Accept a server response only if it answers the current image. */
export function responseArrived (state: ViewState, response: RecognizeResponse): ViewState {
  if (response.input_digest !== state.digest) {
    return state // stale: a newer upload owns the page
  }
  return { ...state, status: 'done', error: null, results: response.results }
}

export function requestFailed (state: ViewState, digest: string, message: string): ViewState {
  if (digest !== state.digest) {
    return state
  }
  return { ...state, status: 'error', error: message }
}

/** Viewport changes never touch results, and re-renders never touch the viewport. */
export function viewportChanged (state: ViewState, viewport: Viewport): ViewState {
  return { ...state, viewport }
}

/** Confidence for display, clamped into [0, 100] percent with one decimal. */
export function confidencePercent (confidence: number): string {
  const pct = Math.min(1, Math.max(0, confidence)) * 100
  return `${pct.toFixed(1)}%`
}

export type BadgeTone = 'good' | 'warn' | 'bad'

export function confidenceTone (confidence: number): BadgeTone {
  const pct = Math.min(1, Math.max(0, confidence)) * 100
  if (pct >= 90) return 'good'
  if (pct >= 70) return 'warn'
  return 'bad'
}
