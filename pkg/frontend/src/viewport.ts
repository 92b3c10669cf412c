/** Screen <-> image coordinate mapping for the selection canvas.
 *
 * The canvas shows the image scaled by `zoom` and panned by an offset in
 * screen pixels.  Rectangles are stored in image coordinates, so every
 * pointer event goes through screenToImage and every redraw goes back
 * through imageToScreen.  The two must round-trip within half a pixel at
 * any zoom the UI offers.
 */

export interface Viewport {
  zoom: number // screen pixels per image pixel
  offsetX: number // screen x of image-space origin
  offsetY: number // screen y of image-space origin
  imageWidth: number
  imageHeight: number
}

export interface Point {
  x: number
  y: number
}

export function screenToImage(view: Viewport, p: Point): Point {
  return {
    x: (p.x - view.offsetX) / view.zoom,
    y: (p.y - view.offsetY) / view.zoom,
  }
}

export function imageToScreen(view: Viewport, p: Point): Point {
  return {
    x: p.x * view.zoom + view.offsetX,
    y: p.y * view.zoom + view.offsetY,
  }
}

/** Clamp an image-space point onto the image bounds. */
export function clampToImage(view: Viewport, p: Point): Point {
  return {
    x: Math.min(Math.max(p.x, 0), view.imageWidth),
    y: Math.min(Math.max(p.y, 0), view.imageHeight),
  }
}

/** Viewport that fits the whole image into a canvas, centered. */
export function fitViewport(
  imageWidth: number,
  imageHeight: number,
  canvasWidth: number,
  canvasHeight: number,
): Viewport {
  const zoom = Math.min(canvasWidth / imageWidth, canvasHeight / imageHeight)
  return {
    zoom,
    offsetX: (canvasWidth - imageWidth * zoom) / 2,
    offsetY: (canvasHeight - imageHeight * zoom) / 2,
    imageWidth,
    imageHeight,
  }
}
