/**
 * SVG assembly.
 *
 * Figures must be byte-stable: the same artifact bytes in give the same SVG
 * bytes out. Nothing in this module consults clocks, locales, process state
 * or randomness, and every coordinate goes through one fixed formatter.
 */

export type Attrs = Record<string, string | number>;

/** Two-decimal pixel coordinate; "-0.00" is normalized to "0.00". */
export function px(v: number): string {
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

/** Compact numeric label for axis ticks and annotations. */
export function label(v: number): string {
  if (v === 0) return "0";
  return String(Number(v.toPrecision(3)));
}

export function escapeText(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function tag(name: string, attrs: Attrs, body?: string): string {
  const parts = Object.keys(attrs).map((k) => ` ${k}="${String(attrs[k])}"`);
  const open = `<${name}${parts.join("")}`;
  return body === undefined ? `${open}/>` : `${open}>${body}</${name}>`;
}

export function svgDocument(width: number, height: number, body: string[]): string {
  const open = tag(
    "svg",
    {
      xmlns: "http://www.w3.org/2000/svg",
      width,
      height,
      viewBox: `0 0 ${width} ${height}`,
      "font-family": "sans-serif",
      "font-size": "11",
    },
    "\n" + body.join("\n") + "\n",
  );
  return open + "\n";
}
