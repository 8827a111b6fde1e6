/** Typed client for the annotation service HTTP/JSON API. */
export class ApiError extends Error {
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
    }
}
export class HttpApi {
    constructor(baseUrl, token) {
        this.baseUrl = baseUrl;
        this.token = token;
    }
    async request(path, init = {}) {
        const response = await fetch(this.baseUrl + path, {
            ...init,
            headers: {
                Authorization: `Bearer ${this.token}`,
                "Content-Type": "application/json",
                ...(init.headers ?? {}),
            },
        });
        const body = await response.json().catch(() => ({}));
        if (!response.ok) {
            const err = body;
            throw new ApiError(response.status, err.code ?? "error", err.message ?? "request failed");
        }
        return body;
    }
    async nextTask(kind) {
        const body = (await this.request(`/tasks/next?kind=${kind}`));
        return body[kind] ?? null;
    }
    async submitJudgment(body) {
        return (await this.request("/judgments", {
            method: "POST",
            body: JSON.stringify(body),
        }));
    }
    async sentences(docId) {
        return (await this.request(`/documents/${docId}/sentences`));
    }
    async getSession(sessionId) {
        return (await this.request(`/sessions/${sessionId}`));
    }
    async advance(sessionId, body) {
        return (await this.request(`/sessions/${sessionId}/advance`, {
            method: "POST",
            body: JSON.stringify(body),
        }));
    }
    async commands() {
        return (await this.request("/commands"));
    }
}
