/** Results grid: renders ranked results in SERVER order (never re-sorted
 * client-side) and lets the user pivot to a result as the next query
 * source.
 *
 * DOM access goes through a tiny factory interface so the render logic is
 * testable without a browser.
 */

import type { RankedResult } from "./types.js"

export interface ElementLike {
  className: string
  textContent: string | null
  dataset: Record<string, string | undefined>
  // `any` keeps real DOM elements (whose appendChild wants a Node)
  // structurally compatible with the test doubles
  appendChild(child: any): unknown
  addEventListener(type: string, handler: () => void): void
  setAttribute(name: string, value: string): void
  replaceChildren(): void
}

export interface DocumentLike {
  createElement(tag: string): ElementLike
}

export interface RenderOptions {
  imageUrl: (imageId: string) => string
  onPivot: (imageId: string) => void
}

/** Render results into `container`, preserving input order exactly.
 * Returns the image ids in rendered order (handy for assertions). */
export function renderResults(
  doc: DocumentLike,
  container: ElementLike,
  results: RankedResult[],
  options: RenderOptions,
): string[] {
  container.replaceChildren()
  if (results.length === 0) {
    const empty = doc.createElement("p")
    empty.className = "empty-state"
    empty.textContent = "No matches - try broadening your selection."
    container.appendChild(empty)
    return []
  }
  const rendered: string[] = []
  for (let rank = 0; rank < results.length; rank++) {
    const r = results[rank]
    const cell = doc.createElement("figure")
    cell.className = "result-cell"
    cell.dataset.imageId = r.image_id
    cell.dataset.rank = String(rank + 1)

    const img = doc.createElement("img")
    img.setAttribute("src", options.imageUrl(r.image_id))
    img.setAttribute("alt", r.image_id)
    cell.appendChild(img)

    const caption = doc.createElement("figcaption")
    caption.textContent =
      `#${rank + 1} ${r.image_id} - score ${r.score}` +
      ` (${r.matched_positive.length} matched)`
    cell.appendChild(caption)

    // clicking a result makes it the next query source (the feedback loop)
    cell.addEventListener("click", () => options.onPivot(r.image_id))

    container.appendChild(cell)
    rendered.push(r.image_id)
  }
  return rendered
}
