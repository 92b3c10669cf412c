/** Thin client for the service's HTTP/JSON API.  This module is the only
 * place the frontend talks to the network. */

import type { QueryBody, RankedResult, WordOccurrence } from "./types.js"

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message)
  }
}

async function getJson<T>(base: string, path: string): Promise<T> {
  const resp = await fetch(base + path)
  if (!resp.ok) {
    throw new ApiError(resp.status, await resp.text())
  }
  return (await resp.json()) as T
}

export function imageUrl(base: string, imageId: string): string {
  return `${base}/api/images/${imageId
    .split("/")
    .map(encodeURIComponent)
    .join("/")}`
}

export async function health(base: string): Promise<{
  status: string
  images: number
  tags: string[]
}> {
  return getJson(base, "/api/health")
}

export async function categories(base: string): Promise<string[]> {
  return getJson(base, "/api/categories")
}

export async function searchTag(base: string, tag: string): Promise<string[]> {
  return getJson(base, `/api/search?tag=${encodeURIComponent(tag)}`)
}

export async function imageWords(
  base: string,
  imageId: string,
): Promise<WordOccurrence[]> {
  return getJson(base, `${imageUrl("", imageId)}/words`)
}

export async function postQuery(
  base: string,
  body: QueryBody,
): Promise<RankedResult[]> {
  const resp = await fetch(base + "/api/query", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  })
  if (!resp.ok) {
    throw new ApiError(resp.status, await resp.text())
  }
  return (await resp.json()) as RankedResult[]
}
