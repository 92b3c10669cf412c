/** Shared wire types mirroring the service's JSON API. */

export type Polarity = "positive" | "negative"

/** Rectangle in IMAGE coordinates (never screen pixels). */
export interface RectSpec {
  x0: number
  y0: number
  x1: number
  y1: number
  polarity: Polarity
}

/** Body accepted by POST /api/query. */
export interface QueryBody {
  source_image: string
  rects: RectSpec[]
  lambda: number
  limit: number
  exclude_source: boolean
}

/** One row of a ranked response. */
export interface RankedResult {
  image_id: string
  score: number
  matched_positive: number[]
  matched_negative: number[]
}

/** One visual-word occurrence from GET /api/images/{id}/words. */
export interface WordOccurrence {
  index: number
  tf: number
  idf: number
  weight: number
  locations: [number, number][]
}
