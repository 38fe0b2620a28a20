// Text rendering of meaning representations in the frame-block layout
// ("#CONCEPT.n" header, aligned "property filler" lines).

import type { FillerJson, FrameJson, MRJson, RangeJson } from "./protocol.js";

function renderNumber(x: number): string {
  if (Number.isInteger(x) && Math.abs(x) < 1e15) return String(x);
  return String(x);
}

function renderRange(r: RangeJson): string {
  if (r.lo !== null && r.hi !== null) {
    const loMark = r.lo_inclusive ? "=" : "";
    const hiMark = r.hi_inclusive ? "=" : "";
    return `${renderNumber(r.lo)}${loMark}<>${hiMark}${renderNumber(r.hi)}`;
  }
  if (r.hi !== null) return `${r.hi_inclusive ? "<=" : "<"}${renderNumber(r.hi)}`;
  if (r.lo !== null) return `${r.lo_inclusive ? ">=" : ">"}${renderNumber(r.lo)}`;
  return "<>";
}

export function renderFiller(filler: FillerJson): string {
  if ("frame" in filler) return `#${filler.frame}`;
  if ("concept" in filler) return `@${filler.concept}`;
  if ("corefer" in filler) return `->${filler.corefer}`;
  if ("value" in filler) return renderNumber(filler.value);
  if ("range" in filler) return renderRange(filler.range);
  if ("text" in filler) {
    return /^[A-Za-z][A-Za-z0-9_-]*$/.test(filler.text)
      ? filler.text
      : JSON.stringify(filler.text);
  }
  return "?";
}

export function renderFrameBlock(frame: FrameJson): string {
  const lines = [`#${frame.id}`];
  const props = Object.keys(frame.slots);
  if (props.length > 0) {
    const width = Math.max(...props.map((p) => p.length));
    for (const prop of props) {
      for (const filler of frame.slots[prop]) {
        lines.push(` ${prop.padEnd(width)} ${renderFiller(filler)}`);
      }
    }
  }
  return lines.join("\n");
}

export function renderMR(mr: MRJson): string {
  return mr.frames.map(renderFrameBlock).join("\n");
}
