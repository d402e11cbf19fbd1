import type { ChartModel } from "./viewer.js";

const W = 720;
const H = 420;
const PAD = { left: 60, right: 140, top: 30, bottom: 40 };

const COLORS = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/** Render the chart model as an inline SVG string.  This is a display aid
 * only; the values themselves come verbatim from the API and the exportable
 * figure is the server-rendered SVG. */
export function renderChartSvg(model: ChartModel): string {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of model.series) {
    for (const p of s.points) {
      if (p.x !== null) xs.push(p.x);
      if (p.y !== null) ys.push(p.y);
    }
  }
  const x0 = xs.length ? Math.min(...xs) : 0;
  const x1 = xs.length ? Math.max(...xs) : 1;
  const y0 = Math.min(0, ...(ys.length ? ys : [0]));
  const y1 = ys.length ? Math.max(...ys) : 1;
  const sx = (v: number) =>
    PAD.left + ((v - x0) / (x1 - x0 || 1)) * (W - PAD.left - PAD.right);
  const sy = (v: number) =>
    H - PAD.bottom - ((v - y0) / (y1 - y0 || 1)) * (H - PAD.top - PAD.bottom);

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<line x1="${PAD.left}" y1="${H - PAD.bottom}" x2="${W - PAD.right}" ` +
      `y2="${H - PAD.bottom}" stroke="black"/>`,
    `<line x1="${PAD.left}" y1="${PAD.top}" x2="${PAD.left}" ` +
      `y2="${H - PAD.bottom}" stroke="black"/>`,
    `<text x="${W / 2}" y="${H - 8}" text-anchor="middle" font-size="12">` +
      `${model.xLabel}</text>`,
    `<text x="14" y="${H / 2}" text-anchor="middle" font-size="12" ` +
      `transform="rotate(-90 14 ${H / 2})">${model.yLabel}</text>`,
  ];

  model.series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    if (model.kind === "line") {
      const pts = s.points
        .filter((p) => p.x !== null && p.y !== null)
        .map((p) => `${sx(p.x as number)},${sy(p.y as number)}`)
        .join(" ");
      parts.push(
        `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`,
      );
    } else {
      const slot = (W - PAD.left - PAD.right) / model.series.length;
      const y = s.points[0]?.y;
      if (y !== null && y !== undefined) {
        const bx = PAD.left + slot * i + slot * 0.15;
        parts.push(
          `<rect x="${bx}" y="${sy(Math.max(y, 0))}" width="${slot * 0.7}" ` +
            `height="${Math.abs(sy(0) - sy(y))}" fill="${color}"/>`,
        );
      }
    }
    const ly = PAD.top + 16 * i;
    parts.push(
      `<rect x="${W - PAD.right + 10}" y="${ly}" width="10" height="10" fill="${color}"/>`,
      `<text x="${W - PAD.right + 24}" y="${ly + 9}" font-size="11">${s.label}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n");
}
