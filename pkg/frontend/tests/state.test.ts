import { describe, expect, it } from 'vitest'

import {
  confidencePercent, confidenceTone, initialState, requestFailed,
  responseArrived, uploadStarted, viewportChanged
} from '../src/state.js'
import type { RecognizeResponse } from '../src/types.js'

function response (digest: string, text = 'abc'): RecognizeResponse {
  const result = {
    text,
    confidence: 0.9,
    per_char: text.split('').map(ch => ({ ch, p: 0.9 })),
    aspect_broken: false,
    elapsed_ms: 12
  }
  return { input_digest: digest, results: { baseline: result, finetuned: result } }
}

describe('upload/response lifecycle', () => {
  it('accepts a response whose digest matches the current image', () => {
    let s = uploadStarted(initialState(), 'd1', 'blob:a')
    expect(s.status).toBe('loading')
    s = responseArrived(s, response('d1'))
    expect(s.status).toBe('done')
    expect(s.results?.baseline?.text).toBe('abc')
    expect(s.results?.finetuned?.text).toBe('abc')
  })

  it('discards a stale response after a second upload', () => {
    let s = uploadStarted(initialState(), 'd1', 'blob:a')
    s = uploadStarted(s, 'd2', 'blob:b')
    const afterStale = responseArrived(s, response('d1', 'old'))
    expect(afterStale).toBe(s) // unchanged: stale digest
    const afterFresh = responseArrived(s, response('d2', 'new'))
    expect(afterFresh.results?.baseline?.text).toBe('new')
  })

  it('a new upload clears previous results and errors', () => {
    let s = uploadStarted(initialState(), 'd1', 'blob:a')
    s = responseArrived(s, response('d1'))
    s = uploadStarted(s, 'd2', 'blob:b')
    expect(s.results).toBeNull()
    expect(s.error).toBeNull()
    expect(s.status).toBe('loading')
  })

  it('failures are non-blocking and ignore stale digests', () => {
    let s = uploadStarted(initialState(), 'd1', 'blob:a')
    const failedStale = requestFailed(s, 'd0', 'boom')
    expect(failedStale).toBe(s)
    s = requestFailed(s, 'd1', 'server unreachable')
    expect(s.status).toBe('error')
    expect(s.error).toBe('server unreachable')
    // retry path: same digest can still complete afterwards
    s = responseArrived(s, response('d1'))
    expect(s.status).toBe('done')
  })

  it('viewport survives a result re-render and vice versa', () => {
    let s = uploadStarted(initialState(), 'd1', 'blob:a')
    s = viewportChanged(s, { zoom: 3, panX: 5, panY: 7 })
    s = responseArrived(s, response('d1'))
    expect(s.viewport).toEqual({ zoom: 3, panX: 5, panY: 7 })
    const before = s.results
    s = viewportChanged(s, { zoom: 4, panX: 0, panY: 0 })
    expect(s.results).toBe(before)
  })
})

describe('confidence display', () => {
  it('formats one decimal and clamps into [0, 100]%', () => {
    expect(confidencePercent(0.914)).toBe('91.4%')
    expect(confidencePercent(1.7)).toBe('100.0%')
    expect(confidencePercent(-0.2)).toBe('0.0%')
  })

  it('tones follow the 90/70 thresholds', () => {
    expect(confidenceTone(0.95)).toBe('good')
    expect(confidenceTone(0.90)).toBe('good')
    expect(confidenceTone(0.80)).toBe('warn')
    expect(confidenceTone(0.70)).toBe('warn')
    expect(confidenceTone(0.69)).toBe('bad')
  })
})
