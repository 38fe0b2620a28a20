// Wire types for the gateway protocol (schema 1).
// See docs/wire-protocol.md in the repository root.

export const SCHEMA_VERSION = 1;

export type EventKind =
  | "UTTERANCE"
  | "THOUGHT"
  | "AGENDA-DELTA"
  | "COMMAND"
  | "STATUS"
  | "VMR"
  | "WORLD-EVENT"
  | "MILESTONE";

export interface GatewayEvent {
  seq: number;
  kind: string;
  tick: number;
  payload: Record<string, unknown>;
}

export interface RangeJson {
  lo: number | null;
  hi: number | null;
  lo_inclusive: boolean;
  hi_inclusive: boolean;
}

export type FillerJson =
  | { frame: string }
  | { concept: string }
  | { corefer: string }
  | { value: number }
  | { text: string }
  | { range: RangeJson };

export interface FrameJson {
  id: string;
  provenance: string;
  tick: number;
  slots: Record<string, FillerJson[]>;
}

export interface MRJson {
  kind: string;
  root: string;
  source: string;
  author: string;
  frames: FrameJson[];
}

export interface PlanStepView {
  label: string;
  kind: string;
  target: string;
  status: string;
}

export interface PlanView {
  id: number;
  script: string;
  blocked: boolean;
  steps: PlanStepView[];
}

export interface GoalView {
  id: number;
  concept: string;
  priority: number;
  status: string;
  plan: PlanView | null;
}

export interface AgendaView {
  goals: GoalView[];
}

export interface ThoughtView {
  tick: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TreeView {
  kind: string;
  name: string;
  status: string | null;
  children: TreeView[];
}

export interface WorldSnapshot {
  width: number;
  height: number;
  obstacles: [number, number][];
  rooms: Record<string, [number, number][]>;
  objects: { id: string; type: string; position: [number, number]; held_by: string | null }[];
  robots: { id: string; kind: string; position: [number, number]; battery: number; holding: string | null }[];
  humans: { id: string; position: [number, number] }[];
}

export interface Snapshot {
  schema: number;
  tick: number;
  finished: boolean;
  agents: Record<string, {
    agenda: AgendaView;
    thoughts: ThoughtView[];
    blackboard: Record<string, Record<string, unknown>>;
    tree: TreeView | null;
  }>;
  world: WorldSnapshot;
  transcript_tail: { tick: number; speaker: string; text: string }[];
  vmrs: MRJson[];
}

export function serviceAddress(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? window.location.origin;
}
