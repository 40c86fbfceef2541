import type { ModelsResponse, RecognizeResponse } from './types.js'

export class ApiError extends Error {
  status: number

  constructor (status: number, message: string) {
    super(message)
    this.status = status
  }
}

async function reasonOf (response: Response): Promise<string> {
  try {
    const body = await response.json()
    if (typeof body.error === 'string') return body.error
    if (body.detail !== undefined) return JSON.stringify(body.detail)
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${response.status}`
}

export async function recognizeBoth (
  baseUrl: string, file: Blob, fetchFn: typeof fetch = fetch
): Promise<RecognizeResponse> {
  const form = new FormData()
  form.append('file', file, 'upload.png')
  const response = await fetchFn(`${baseUrl}/api/recognize?model=both`, {
    method: 'POST',
    body: form
  })
  if (!response.ok) {
    throw new ApiError(response.status, await reasonOf(response))
  }
  return await response.json() as RecognizeResponse
}

export async function fetchModels (
  baseUrl: string, fetchFn: typeof fetch = fetch
): Promise<ModelsResponse> {
  const response = await fetchFn(`${baseUrl}/api/models`)
  if (!response.ok) {
    throw new ApiError(response.status, await reasonOf(response))
  }
  return await response.json() as ModelsResponse
}
