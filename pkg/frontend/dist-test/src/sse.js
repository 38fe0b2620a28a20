// Server-sent-events client over fetch streaming, with `since` resume.
//
// fetch + ReadableStream (rather than EventSource) so the same code runs
// in the browser and under node's test runner, and so reconnects can pass
// an explicit ?since= computed from the store's high-water mark.
export class EventStream {
    opts;
    stopped = false;
    controller = null;
    retryMs;
    constructor(opts) {
        this.opts = opts;
        this.retryMs = opts.retryMs ?? 1000;
    }
    start() {
        void this.loop();
    }
    stop() {
        this.stopped = true;
        this.controller?.abort();
    }
    status(s) {
        this.opts.onStatus?.(s);
    }
    async loop() {
        while (!this.stopped) {
            this.status("connecting");
            try {
                const ended = await this.readOnce();
                if (ended) {
                    this.status("ended");
                    return;
                }
            }
            catch (err) {
                if (this.stopped)
                    return;
            }
            if (this.stopped)
                return;
            this.status("offline");
            await new Promise((resolve) => setTimeout(resolve, this.retryMs));
        }
    }
    /** One connection; resolves true when the server sent the end event. */
    async readOnce() {
        this.controller = new AbortController();
        const since = this.opts.nextSeq();
        const resp = await fetch(`${this.opts.base}/events?since=${since}`, {
            signal: this.controller.signal,
            headers: { Accept: "text/event-stream" },
        });
        if (!resp.ok || resp.body === null) {
            throw new Error(`stream request failed: ${resp.status}`);
        }
        this.status("online");
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        let eventName = "";
        for (;;) {
            const { done, value } = await reader.read();
            if (done)
                return false;
            buffer += decoder.decode(value, { stream: true });
            let nl;
            while ((nl = buffer.indexOf("\n")) >= 0) {
                const line = buffer.slice(0, nl).trimEnd();
                buffer = buffer.slice(nl + 1);
                if (line.startsWith("event: ")) {
                    eventName = line.slice(7);
                }
                else if (line.startsWith("data: ")) {
                    if (eventName === "end")
                        return true;
                    try {
                        this.opts.onEvent(JSON.parse(line.slice(6)));
                    }
                    catch {
                        console.warn("unparseable event frame", line);
                    }
                }
                else if (line === "") {
                    eventName = "";
                }
            }
        }
    }
}
export async function fetchSnapshot(base) {
    const resp = await fetch(`${base}/snapshot`);
    if (!resp.ok)
        throw new Error(`snapshot request failed: ${resp.status}`);
    return resp.json();
}
export async function postUtterance(base, speaker, text) {
    const resp = await fetch(`${base}/utterance`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ speaker, text }),
    });
    return (await resp.json());
}
export async function postControl(base, action) {
    await fetch(`${base}/control`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ action }),
    });
}
//# sourceMappingURL=sse.js.map