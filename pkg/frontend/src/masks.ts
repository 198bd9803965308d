/** Mask bitmaps decoded client-side for the inside-the-body click check. */

export interface MaskBitmap {
  width: number;
  height: number;
  bits: Uint8Array;
}

/**
 * Threshold RGBA pixel data (as from a 2D canvas) the same way the server
 * does for grayscale PNGs: foreground iff the value is at least 128.
 */
export function maskFromImageData(data: {
  width: number;
  height: number;
  data: Uint8ClampedArray | Uint8Array;
}): MaskBitmap {
  const bits = new Uint8Array(data.width * data.height);
  for (let i = 0; i < bits.length; i++) {
    bits[i] = data.data[i * 4]! >= 128 ? 1 : 0;
  }
  return { width: data.width, height: data.height, bits };
}

export function maskContains(mask: MaskBitmap, x: number, y: number): boolean {
  const c = Math.floor(x);
  const r = Math.floor(y);
  if (r < 0 || r >= mask.height || c < 0 || c >= mask.width) {
    return false;
  }
  return mask.bits[r * mask.width + c] === 1;
}
