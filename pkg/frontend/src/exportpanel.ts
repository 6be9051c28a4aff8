/**
 * Export panel: series selection, date window (prefilled from an accepted
 * overlap suggestion), optional aggregation, and the rendered export text.
 */

import type { AppCtx } from "./ctx.js";

export async function mountExportPanel(host: HTMLElement, ctx: AppCtx): Promise<void> {
    const state = ctx.store.get();
    const preset = state.exportSeriesIds.length > 0
        ? state.exportSeriesIds
        : state.selectedSeriesId ? [state.selectedSeriesId] : [];

    host.innerHTML = `
        <div class="export-form">
            <label>Series ids (comma separated)
                <input type="text" class="export-ids" value="${preset.join(", ")}">
            </label>
            <label>From <input type="date" class="export-from"
                value="${state.exportRange?.from ?? ""}"></label>
            <label>To <input type="date" class="export-to"
                value="${state.exportRange?.to ?? ""}"></label>
            <label>Aggregation
                <select class="export-step">
                    <option value="">daily (none)</option>
                    <option value="monthly">monthly</option>
                    <option value="yearly">yearly</option>
                </select>
            </label>
            <button class="export-run">Export</button>
        </div>
        <pre class="export-output"></pre>
    `;

    const output = host.querySelector<HTMLElement>(".export-output")!;
    host.querySelector(".export-run")!.addEventListener("click", async () => {
        const ids = host.querySelector<HTMLInputElement>(".export-ids")!.value
            .split(",").map((s) => s.trim()).filter(Boolean);
        if (ids.length === 0) {
            output.textContent = "no series selected";
            return;
        }
        const step = host.querySelector<HTMLSelectElement>(".export-step")!.value;
        const body: Parameters<typeof ctx.api.exportSeries>[0] = { seriesIds: ids };
        if (step) {
            body.aggregation = {
                step,
                gapPolicy: "tolerant",
                maxMissingFraction: 1.0,
            };
        }
        let text: string;
        try {
            text = await ctx.api.exportSeries(body);
        } catch (err) {
            output.textContent = `export failed: ${(err as Error).message}`;
            return;
        }
        const from = host.querySelector<HTMLInputElement>(".export-from")!.value;
        const to = host.querySelector<HTMLInputElement>(".export-to")!.value;
        output.textContent = clipWindow(text, from, to);
    });
}

/**
 * The export endpoint returns full spans; the date window trims rendered
 * lines only. Labels may be shorter than a full date (monthly "1990-01",
 * yearly "1990"), so bounds are truncated to the label length before the
 * ISO lexicographic comparison.
 */
function clipWindow(text: string, from: string, to: string): string {
    if (!from && !to) {
        return text;
    }
    return text.split("\n").filter((line) => {
        if (line.startsWith("#") || line.trim() === "") {
            return true;
        }
        const label = line.split("\t")[0];
        if (from && label < from.slice(0, label.length)) {
            return false;
        }
        if (to && label > to.slice(0, label.length)) {
            return false;
        }
        return true;
    }).join("\n");
}
