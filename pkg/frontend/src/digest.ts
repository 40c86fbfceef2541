// Client-side SHA-256 matching the server's input_digest, so stale
// responses can be detected by comparing digests instead of guessing.

export async function sha256Hex (data: ArrayBuffer): Promise<string> {
  const hash = await crypto.subtle.digest('SHA-256', data)
  return Array.from(new Uint8Array(hash))
    .map(b => b.toString(16).padStart(2, '0'))
    .join('')
}
