/**
 * Axis mapping. A Scale carries the data-to-pixel map plus the tick values
 * worth labelling. Log axes clamp nonpositive data to a floor derived from
 * the data itself so a stray zero cannot blow up the transform.
 */

export interface Scale {
  map(v: number): number;
  ticks: number[];
}

function niceStep(raw: number): number {
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const frac = raw / mag;
  if (frac <= 1) return mag;
  if (frac <= 2) return 2 * mag;
  if (frac <= 5) return 5 * mag;
  return 10 * mag;
}

export function linearScale(lo: number, hi: number, px0: number, px1: number): Scale {
  if (hi <= lo) hi = lo + 1; // degenerate domain, e.g. a single sample
  const span = hi - lo;
  const step = niceStep(span / 4);
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * span; t += step) {
    // snap away float dust so tick labels stay short
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return {
    map: (v) => px0 + ((v - lo) / span) * (px1 - px0),
    ticks,
  };
}

/** Smallest positive entry, or a tiny fallback when nothing is positive. */
export function positiveFloor(values: number[]): number {
  let best = Infinity;
  for (const v of values) {
    if (v > 0 && v < best) best = v;
  }
  return Number.isFinite(best) ? best : 1e-18;
}

export function log10Scale(lo: number, hi: number, px0: number, px1: number): Scale {
  const l0 = Math.log10(lo);
  const l1 = Math.log10(hi);
  const lin = linearScale(l0, l1, px0, px1);
  const ticks: number[] = [];
  for (let e = Math.ceil(l0); e <= Math.floor(l1); e += 1) {
    ticks.push(Math.pow(10, e));
  }
  if (ticks.length === 0) {
    ticks.push(lo, hi);
  }
  return {
    map: (v) => lin.map(Math.log10(v)),
    ticks,
  };
}

/** Tick label for log axes: decades as 1e-4, everything else compacted. */
export function logLabel(v: number): string {
  const e = Math.log10(v);
  if (Number.isInteger(e)) return `1e${e}`;
  return String(Number(v.toPrecision(3)));
}
