/**
 * Perceptually ordered colormap for scalar fields on the mesh.
 *
 * The anchors follow the viridis palette: luminance rises monotonically
 * from dark violet through teal to bright yellow, so larger field values
 * always read as brighter regardless of hue.
 */

export type RGB = readonly [number, number, number];

const ANCHORS: RGB[] = [
  [68, 1, 84],
  [72, 40, 120],
  [62, 74, 137],
  [49, 104, 142],
  [38, 130, 142],
  [31, 158, 137],
  [53, 183, 121],
  [109, 205, 89],
  [180, 222, 44],
  [253, 231, 37],
];

const clamp01 = (t: number): number => {
  if (!Number.isFinite(t)) return 0.5;
  return t < 0 ? 0 : t > 1 ? 1 : t;
};

/** Map a normalized value in [0, 1] to an RGB triple (values clamp). */
export const colormap = (t: number): RGB => {
  const u = clamp01(t) * (ANCHORS.length - 1);
  const lo = Math.min(Math.floor(u), ANCHORS.length - 2);
  const frac = u - lo;
  const a = ANCHORS[lo];
  const b = ANCHORS[lo + 1];
  return [
    Math.round(a[0] + (b[0] - a[0]) * frac),
    Math.round(a[1] + (b[1] - a[1]) * frac),
    Math.round(a[2] + (b[2] - a[2]) * frac),
  ];
};

/** Relative luminance of an RGB triple (ITU-R BT.709 weights). */
export const luminance = (rgb: RGB): number =>
  0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2];

/** CSS color string for an RGB triple. */
export const cssColor = (rgb: RGB): string =>
  `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;

/** CSS linear-gradient stops sampling the colormap, for legend strips. */
export const gradientStops = (count = 16): string[] => {
  const stops: string[] = [];
  for (let i = 0; i < count; i++) {
    stops.push(cssColor(colormap(i / (count - 1))));
  }
  return stops;
};
