// The panel model: a pure fold of gateway events and snapshots.
//
// Every panel renders from this state alone; no client-side simulation.
// applyEvent/applySnapshot return fresh state objects and never mutate
// their input, so identical event sequences produce identical (deeply
// equal) states -- the property the snapshot tests pin down.
import { SCHEMA_VERSION } from "./protocol.js";
export function initialState() {
    return {
        lastSeq: -1,
        schemaOk: null,
        snapshotTick: -1,
        finished: false,
        transcript: [],
        agendas: {},
        thoughts: {},
        vmrs: [],
        commands: [],
        statuses: [],
        milestones: [],
        world: null,
        trees: {},
        warnings: [],
    };
}
export function applySnapshot(state, snap) {
    const next = { ...state };
    next.schemaOk = snap.schema === SCHEMA_VERSION;
    if (!next.schemaOk) {
        next.warnings = [...state.warnings,
            `schema mismatch: gateway=${snap.schema} console=${SCHEMA_VERSION}`];
        return next;
    }
    if (!snap.agents || !snap.world) {
        return next; // the run has not published its first tick barrier yet
    }
    next.snapshotTick = snap.tick;
    next.finished = snap.finished;
    next.agendas = { ...state.agendas };
    next.thoughts = { ...state.thoughts };
    next.trees = { ...state.trees };
    for (const [agent, view] of Object.entries(snap.agents)) {
        next.agendas[agent] = view.agenda;
        next.trees[agent] = view.tree;
        if (!(agent in next.thoughts))
            next.thoughts[agent] = [];
    }
    next.world = worldFromSnapshot(snap);
    return next;
}
function worldFromSnapshot(snap) {
    const world = snap.world;
    const objects = {};
    for (const o of world.objects) {
        objects[o.id] = { x: o.position[0], y: o.position[1], type: o.type,
            heldBy: o.held_by };
    }
    const robots = {};
    for (const r of world.robots) {
        robots[r.id] = { x: r.position[0], y: r.position[1], kind: r.kind,
            holding: r.holding, battery: r.battery };
    }
    const humans = {};
    for (const h of world.humans) {
        humans[h.id] = { x: h.position[0], y: h.position[1] };
    }
    return {
        width: world.width,
        height: world.height,
        obstacles: world.obstacles.map(([x, y]) => `${x},${y}`).sort(),
        rooms: world.rooms,
        objects,
        robots,
        humans,
    };
}
export function applyEvent(state, event) {
    if (event.seq <= state.lastSeq) {
        return state; // duplicate delivery (reconnect overlap): at-least-once -> once
    }
    const next = { ...state, lastSeq: event.seq };
    const p = event.payload;
    switch (event.kind) {
        case "UTTERANCE":
            next.transcript = [...state.transcript,
                { seq: event.seq, tick: event.tick, speaker: p.speaker, text: p.text }];
            break;
        case "THOUGHT": {
            const agent = p.agent;
            const entry = { tick: p.tick, kind: p.kind, payload: p.payload };
            next.thoughts = { ...state.thoughts,
                [agent]: [...(state.thoughts[agent] ?? []), entry] };
            break;
        }
        case "AGENDA-DELTA":
            next.agendas = { ...state.agendas, [p.agent]: p.agenda };
            break;
        case "COMMAND":
            next.commands = [...state.commands,
                { seq: event.seq, tick: event.tick, robot: p.robot,
                    id: p.command.id, verb: p.command.verb }];
            break;
        case "STATUS":
            next.statuses = [...state.statuses,
                { seq: event.seq, robot: p.robot, commandId: p.report.command_id,
                    status: p.report.status }];
            break;
        case "VMR":
            next.vmrs = [...state.vmrs, { agent: p.agent, mr: p.mr }];
            break;
        case "WORLD-EVENT":
            if (state.world !== null) {
                next.world = applyWorldLine(state.world, p.line);
            }
            break;
        case "MILESTONE":
            next.milestones = [...state.milestones, { name: p.name, ok: p.ok }];
            break;
        default:
            console.warn(`ignoring unknown gateway event kind: ${event.kind}`);
            next.warnings = [...state.warnings, `unknown event kind ${event.kind}`];
            break;
    }
    return next;
}
// World-event lines have the canonical form
//   "tick=12 robot=ugv-1 kind=MOVED from=4,8 to=5,8"
export function parseWorldLine(line) {
    const out = {};
    for (const token of line.split(/\s+/)) {
        const eq = token.indexOf("=");
        if (eq > 0)
            out[token.slice(0, eq)] = token.slice(eq + 1);
    }
    return out;
}
function cell(text) {
    if (!text)
        return null;
    const [x, y] = text.split(",").map(Number);
    if (Number.isNaN(x) || Number.isNaN(y))
        return null;
    return [x, y];
}
export function applyWorldLine(world, line) {
    const fields = parseWorldLine(line);
    const kind = fields.kind;
    const robotId = fields.robot;
    if (kind === "MOVED") {
        const to = cell(fields.to);
        if (!to || !world.robots[robotId])
            return world;
        const robots = { ...world.robots,
            [robotId]: { ...world.robots[robotId], x: to[0], y: to[1] } };
        const objects = { ...world.objects };
        for (const [oid, obj] of Object.entries(objects)) {
            if (obj.heldBy === robotId)
                objects[oid] = { ...obj, x: to[0], y: to[1] };
        }
        return { ...world, robots, objects };
    }
    if (kind === "PICKED") {
        const oid = fields.object;
        const robot = world.robots[robotId];
        if (!oid || !robot || !world.objects[oid])
            return world;
        return {
            ...world,
            robots: { ...world.robots, [robotId]: { ...robot, holding: oid } },
            objects: { ...world.objects,
                [oid]: { ...world.objects[oid], heldBy: robotId, x: robot.x, y: robot.y } },
        };
    }
    if (kind === "DROPPED") {
        const oid = fields.object;
        const at = cell(fields.at);
        const robot = world.robots[robotId];
        if (!oid || !at || !world.objects[oid])
            return world;
        const robots = robot
            ? { ...world.robots, [robotId]: { ...robot, holding: null } }
            : world.robots;
        return {
            ...world,
            robots,
            objects: { ...world.objects,
                [oid]: { ...world.objects[oid], heldBy: null, x: at[0], y: at[1] } },
        };
    }
    if (kind === "INJECT" && fields.what === "add-obstacle") {
        const at = cell(fields.cell);
        if (!at)
            return world;
        const key = `${at[0]},${at[1]}`;
        if (world.obstacles.includes(key))
            return world;
        return { ...world, obstacles: [...world.obstacles, key].sort() };
    }
    if (kind === "INJECT" && fields.what === "move-object") {
        const oid = fields.object;
        const to = cell(fields.to);
        if (!oid || !to || !world.objects[oid])
            return world;
        return { ...world, objects: { ...world.objects,
                [oid]: { ...world.objects[oid], x: to[0], y: to[1] } } };
    }
    return world; // BLOCKED, REJECTED, RECHARGED, BATTERY-* change nothing drawn
}
//# sourceMappingURL=store.js.map