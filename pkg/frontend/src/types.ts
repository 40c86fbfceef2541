export interface CharProb {
  ch: string
  p: number
}

export interface ModelResult {
  text: string
  confidence: number
  per_char: CharProb[]
  aspect_broken: boolean
  elapsed_ms: number
}

export interface RecognizeResponse {
  input_digest: string
  results: {
    baseline?: ModelResult
    finetuned?: ModelResult
  }
}

export interface ModelInfo {
  name: string
  dict_size: number
  parameter_count: number
  file_digest: string
}

export interface ModelsResponse {
  models: ModelInfo[]
  identical: boolean
}
