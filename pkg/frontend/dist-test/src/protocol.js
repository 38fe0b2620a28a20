// Wire types for the gateway protocol (schema 1).
// See docs/wire-protocol.md in the repository root.
export const SCHEMA_VERSION = 1;
export function serviceAddress() {
    const params = new URLSearchParams(window.location.search);
    return params.get("service") ?? window.location.origin;
}
//# sourceMappingURL=protocol.js.map