import { strict as assert } from "node:assert";
import { test } from "node:test";

import { renderFrameBlock, renderMR } from "../src/frames.js";

test("frame block uses the aligned text layout", () => {
  const block = renderFrameBlock({
    id: "DESCRIBE-MECHANICAL-PROBLEM.1",
    provenance: "TMR",
    tick: 0,
    slots: {
      agent: [{ frame: "HUMAN.1" }],
      beneficiary: [{ frame: "ROBOT.1" }],
      theme: [{ frame: "OVERHEAT.1" }],
    },
  });
  assert.deepEqual(block.split("\n"), [
    "#DESCRIBE-MECHANICAL-PROBLEM.1",
    " agent       #HUMAN.1",
    " beneficiary #ROBOT.1",
    " theme       #OVERHEAT.1",
  ]);
});

test("filler notations match the wire reference", () => {
  const block = renderFrameBlock({
    id: "THERMOSTAT.1",
    provenance: "VMR",
    tick: 3,
    slots: {
      age: [{ range: { lo: 0.0001, hi: 0.1, lo_inclusive: false, hi_inclusive: false } }],
      range: [{ range: { lo: null, hi: 0.7, lo_inclusive: false, hi_inclusive: false } }],
      corefer: [{ corefer: "THERMOSTAT.2" }],
      domain: [{ concept: "THERMOSTAT" }],
      value: [{ value: 0.5 }],
      type: [{ text: "EPISTEMIC" }],
      "label-code": [{ text: "T-204" }],
    },
  });
  assert.ok(block.includes("age        0.0001<>0.1"));
  assert.ok(block.includes("range      <0.7"));
  assert.ok(block.includes("corefer    ->THERMOSTAT.2"));
  assert.ok(block.includes("domain     @THERMOSTAT"));
  assert.ok(block.includes("value      0.5"));
  assert.ok(block.includes("type       EPISTEMIC"));
  assert.ok(block.includes("label-code T-204"));
});

test("meaning representation renders root first", () => {
  const text = renderMR({
    kind: "VMR",
    root: "KEY.1",
    source: "",
    author: "ugv-1",
    frames: [
      { id: "KEY.1", provenance: "VMR", tick: 0,
        slots: { color: [{ text: "silver" }] } },
      { id: "LOCATION.1", provenance: "VMR", tick: 0, slots: {} },
    ],
  });
  assert.deepEqual(text.split("\n"),
    ["#KEY.1", " color silver", "#LOCATION.1"]);
});
