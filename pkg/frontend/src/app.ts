/** Application wiring: tag search -> selection canvas -> results grid.
 * All retrieval logic lives server-side; this file only moves state
 * between the DOM and the pure modules. */

import { ApiError, categories, imageUrl, imageWords, postQuery, searchTag } from "./api.js"
import { capturedWords, drawRect, drawWordMarkers } from "./overlay.js"
import { renderResults } from "./results.js"
import {
  SelectionState,
  buildQueryBody,
  canSubmit,
  completeDrag,
  newSelection,
  rectAt,
  removeSelectedRect,
  setTool,
} from "./selection.js"
import type { WordOccurrence } from "./types.js"
import type { Point, Viewport } from "./viewport.js"
import { fitViewport, screenToImage } from "./viewport.js"

const API_BASE = ""

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

let selection: SelectionState | null = null
let view: Viewport | null = null
let sourceBitmap: HTMLImageElement | null = null
let sourceWords: WordOccurrence[] = []
let dragStart: Point | null = null
let queryInFlight = false
let overlayEnabled = false

function showError(message: string): void {
  const banner = el<HTMLDivElement>("error-banner")
  banner.textContent = message
  banner.hidden = false
}

function clearError(): void {
  el<HTMLDivElement>("error-banner").hidden = true
}

// ---------------------------------------------------------------------------
// tag search

async function runTagSearch(): Promise<void> {
  clearError()
  const tag = el<HTMLInputElement>("tag-input").value.trim()
  const grid = el<HTMLDivElement>("search-grid")
  grid.replaceChildren()
  if (!tag) return
  let ids: string[]
  try {
    ids = await searchTag(API_BASE, tag)
  } catch (err) {
    showError(`Search failed: ${err instanceof Error ? err.message : err}`)
    return
  }
  if (ids.length === 0) {
    const p = document.createElement("p")
    p.className = "empty-state"
    p.textContent = `No images tagged "${tag}".`
    grid.appendChild(p)
    return
  }
  for (const id of ids) {
    const img = document.createElement("img")
    img.src = imageUrl(API_BASE, id)
    img.alt = id
    img.title = id
    img.addEventListener("click", () => void openCanvas(id))
    grid.appendChild(img)
  }
}

async function loadSuggestions(): Promise<void> {
  try {
    const tags = await categories(API_BASE)
    const list = el<HTMLDataListElement>("tag-suggestions")
    list.replaceChildren()
    for (const tag of tags) {
      const option = document.createElement("option")
      option.value = tag
      list.appendChild(option)
    }
  } catch {
    // suggestions are a nicety; the text input still works without them
  }
}

// ---------------------------------------------------------------------------
// selection canvas

async function openCanvas(imageId: string): Promise<void> {
  clearError()
  selection = newSelection(imageId)
  el<HTMLElement>("canvas-panel").hidden = false
  el<HTMLSpanElement>("canvas-source").textContent = imageId

  sourceBitmap = new Image()
  sourceBitmap.src = imageUrl(API_BASE, imageId)
  await sourceBitmap.decode().catch(() => {
    showError(`Could not load image ${imageId}`)
  })
  const canvas = el<HTMLCanvasElement>("selection-canvas")
  view = fitViewport(
    sourceBitmap.naturalWidth,
    sourceBitmap.naturalHeight,
    canvas.width,
    canvas.height,
  )
  try {
    sourceWords = await imageWords(API_BASE, imageId)
  } catch {
    sourceWords = []
  }
  redraw()
  syncControls()
}

function redraw(): void {
  if (!selection || !view || !sourceBitmap) return
  const canvas = el<HTMLCanvasElement>("selection-canvas")
  const ctx = canvas.getContext("2d")
  if (!ctx) return
  ctx.clearRect(0, 0, canvas.width, canvas.height)
  ctx.drawImage(
    sourceBitmap,
    view.offsetX,
    view.offsetY,
    view.imageWidth * view.zoom,
    view.imageHeight * view.zoom,
  )
  if (overlayEnabled) {
    drawWordMarkers(ctx, view, sourceWords)
  }
  for (const rect of selection.rects) {
    drawRect(ctx, view, rect, rect.id === selection.selectedRectId)
  }
}

function syncControls(): void {
  if (!selection) return
  el<HTMLButtonElement>("submit-query").disabled =
    !canSubmit(selection) || queryInFlight
  const pos = capturedWords(sourceWords, selection.rects, "positive").size
  const neg = capturedWords(sourceWords, selection.rects, "negative").size
  el<HTMLSpanElement>("capture-counts").textContent =
    `${pos} positive / ${neg} negative words captured`
}

function canvasPoint(event: MouseEvent): Point {
  const canvas = el<HTMLCanvasElement>("selection-canvas")
  const bounds = canvas.getBoundingClientRect()
  return { x: event.clientX - bounds.left, y: event.clientY - bounds.top }
}

function wireCanvas(): void {
  const canvas = el<HTMLCanvasElement>("selection-canvas")
  canvas.addEventListener("mousedown", (event) => {
    dragStart = canvasPoint(event)
  })
  canvas.addEventListener("mouseup", (event) => {
    if (!selection || !view || !dragStart) return
    const end = canvasPoint(event)
    const next = completeDrag(selection, view, dragStart, end)
    if (next === selection) {
      // degenerate drag: treat as click-to-select
      const hit = rectAt(selection, screenToImage(view, end))
      selection = { ...selection, selectedRectId: hit }
    } else {
      selection = next
    }
    dragStart = null
    redraw()
    syncControls()
  })
  document.addEventListener("keydown", (event) => {
    if (event.key === "Delete" || event.key === "Backspace") {
      if (!selection) return
      selection = removeSelectedRect(selection)
      redraw()
      syncControls()
    }
  })
}

// ---------------------------------------------------------------------------
// query submission / results

async function submitQuery(): Promise<void> {
  if (!selection || !canSubmit(selection) || queryInFlight) return
  clearError()
  queryInFlight = true
  syncControls()
  selection.lambda = Number(el<HTMLInputElement>("lambda-input").value) || 0
  selection.limit = Number(el<HTMLInputElement>("limit-input").value) || 20
  try {
    const results = await postQuery(API_BASE, buildQueryBody(selection))
    renderResults(document, el<HTMLDivElement>("results-grid"), results, {
      imageUrl: (id) => imageUrl(API_BASE, id),
      onPivot: (id) => void openCanvas(id),
    })
  } catch (err) {
    if (err instanceof ApiError) {
      showError(`Query rejected (${err.status}): ${err.message}`)
    } else {
      showError(`Query failed: ${err instanceof Error ? err.message : err}`)
    }
  } finally {
    queryInFlight = false
    syncControls()
  }
}

// ---------------------------------------------------------------------------

export function main(): void {
  el<HTMLButtonElement>("search-button").addEventListener(
    "click",
    () => void runTagSearch(),
  )
  el<HTMLInputElement>("tag-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void runTagSearch()
  })
  el<HTMLButtonElement>("tool-positive").addEventListener("click", () => {
    if (selection) selection = setTool(selection, "positive")
  })
  el<HTMLButtonElement>("tool-negative").addEventListener("click", () => {
    if (selection) selection = setTool(selection, "negative")
  })
  el<HTMLInputElement>("overlay-toggle").addEventListener("change", (event) => {
    overlayEnabled = (event.target as HTMLInputElement).checked
    redraw()
  })
  el<HTMLButtonElement>("submit-query").addEventListener(
    "click",
    () => void submitQuery(),
  )
  wireCanvas()
  void loadSuggestions()
}

if (typeof document !== "undefined" && document.getElementById("search-button")) {
  main()
}
