export function makeHttpClient(baseUrl, fetchImpl = fetch) {
    return async (traces) => {
        const res = await fetchImpl(`${baseUrl}/recognize`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ traces }),
        });
        if (!res.ok) {
            let detail = `${res.status}`;
            try {
                const body = await res.json();
                if (body && body.error)
                    detail = `${res.status}: ${body.error}`;
            }
            catch {
                // non-JSON error body: keep the status code
            }
            throw new Error(`recognition failed (${detail})`);
        }
        return (await res.json());
    };
}
