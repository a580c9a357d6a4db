// Unit tests over the pure view-state derivation.

import assert from "node:assert/strict";
import { test } from "node:test";

import {
  applyChatReply,
  applyCreated,
  applyDescription,
  applyDiagnosis,
  applyPlan,
  applyUserMessage,
  clearBanner,
  initialState,
} from "../src/state.js";
import { FIXTURE } from "./mock_service.js";

function diagnosedState() {
  let state = applyCreated(initialState(), FIXTURE.info as never);
  state = applyDescription(state, FIXTURE.description as never);
  return applyDiagnosis(state, FIXTURE.diagnosis as never);
}

test("highlight invariant: panel highlights equal payload members", () => {
  const state = diagnosedState();
  const highlighted = state.modelPanel.filter((l) => l.highlighted).map((l) => l.id);
  assert.deepEqual(highlighted.sort(), [...FIXTURE.diagnosis.members].sort());
  assert.deepEqual(state.highlightSet.sort(), [...FIXTURE.diagnosis.members].sort());
});

test("bound members get a synthetic panel line", () => {
  let state = applyCreated(initialState(), FIXTURE.info as never);
  state = applyDescription(state, FIXTURE.description as never);
  state = applyDiagnosis(state, {
    ...FIXTURE.diagnosis,
    members: ["demand", "x.lower"],
  } as never);
  const bound = state.modelPanel.find((l) => l.id === "x.lower");
  assert.ok(bound && bound.highlighted);
});

test("already-feasible diagnosis clears highlights", () => {
  let state = diagnosedState();
  state = applyDiagnosis(state, null);
  assert.deepEqual(state.highlightSet, []);
});

test("banner visible iff the last reply flagged pending", () => {
  let state = diagnosedState();
  state = applyUserMessage(state, "relax dmin");
  assert.equal(state.busy, true);
  state = applyChatReply(state, {
    reply: "WARNING[...]", tool_calls: [], pending_confirmation: true,
  });
  assert.ok(state.banner);
  assert.equal(state.busy, false);
  state = applyChatReply(state, {
    reply: "done", tool_calls: ["solve_repair"], pending_confirmation: false,
  });
  assert.equal(state.banner, null);
});

test("plan application yields the diff rows and drops the banner", () => {
  let state = diagnosedState();
  state = { ...state, banner: { reason: "immutable_param", consequence: "..." } };
  state = applyPlan(state, FIXTURE.plan as never);
  assert.equal(state.banner, null);
  assert.deepEqual(state.paramDiff, [{ param: "dmin", before: "1", after: "0" }]);
});

test("clearBanner leaves everything else alone", () => {
  const state = diagnosedState();
  const withBanner = { ...state, banner: { reason: "x", consequence: "y" } };
  const cleared = clearBanner(withBanner);
  assert.equal(cleared.banner, null);
  assert.deepEqual(cleared.modelPanel, state.modelPanel);
  assert.deepEqual(cleared.transcript, state.transcript);
});
