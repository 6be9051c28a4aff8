/**
 * Gap filling wizard: method, neighbors ranked by correlation, method
 * parameters, preview with fit diagnostics, then an explicit commit. The
 * only mutating call is the commit itself; cancelling anywhere performs
 * no write.
 */

import type { CorrelationResponse, FillPreviewJson, SeriesInfoJson } from "./api.js";
import { ApiError } from "./api.js";
import type { AppCtx } from "./ctx.js";
import { fmtNumber } from "./render.js";

export type WizardStep = "method" | "neighbors" | "params" | "preview" | "done" | "cancelled";

export interface ParamDef {
    key: string;
    label: string;
    value: number;
    step?: number;
}

export interface MethodDef {
    id: string;
    label: string;
    usesNeighbors: boolean;
    params: ParamDef[];
}

export const FILL_METHODS: MethodDef[] = [
    {
        id: "temporal-linear",
        label: "Temporal linear interpolation",
        usesNeighbors: false,
        params: [{ key: "maxGapDays", label: "Max gap length (days)", value: 3 }],
    },
    {
        id: "idw",
        label: "Inverse distance weighting",
        usesNeighbors: true,
        params: [{ key: "power", label: "Distance power", value: 2, step: 0.5 }],
    },
    {
        id: "regression",
        label: "Neighbor regression",
        usesNeighbors: true,
        params: [
            { key: "minPairs", label: "Min joint observations", value: 30 },
            { key: "minAbsR", label: "Min |r|", value: 0.7, step: 0.05 },
        ],
    },
];

export interface WizardModel {
    step: WizardStep;
    method: MethodDef | null;
    neighborIds: string[];
    params: Record<string, number>;
    preview: FillPreviewJson | null;
}

/** Pure stepper logic; panels render whatever state this machine holds. */
export class FillWizardMachine {
    model: WizardModel;

    constructor() {
        this.model = freshModel();
    }

    chooseMethod(method: MethodDef): void {
        this.model.method = method;
        this.model.params = Object.fromEntries(
            method.params.map((p) => [p.key, p.value]));
        this.model.neighborIds = [];
        this.model.preview = null;
    }

    canAdvance(): boolean {
        const m = this.model;
        switch (m.step) {
            case "method":
                return m.method !== null;
            case "neighbors":
                return m.neighborIds.length > 0;
            case "params":
                return true;
            default:
                return false;
        }
    }

    next(): WizardStep {
        const m = this.model;
        if (!this.canAdvance()) {
            return m.step;
        }
        if (m.step === "method") {
            m.step = m.method!.usesNeighbors ? "neighbors" : "params";
        } else if (m.step === "neighbors") {
            m.step = "params";
        } else if (m.step === "params") {
            m.step = "preview";
        }
        return m.step;
    }

    back(): WizardStep {
        const m = this.model;
        if (m.step === "neighbors") {
            m.step = "method";
        } else if (m.step === "params") {
            m.step = m.method?.usesNeighbors ? "neighbors" : "method";
        } else if (m.step === "preview") {
            m.step = "params";
            m.preview = null;
        }
        return m.step;
    }

    cancel(): void {
        this.model = freshModel();
        this.model.step = "cancelled";
    }

    finish(): void {
        this.model.step = "done";
    }
}

function freshModel(): WizardModel {
    return { step: "method", method: null, neighborIds: [], params: {}, preview: null };
}

interface NeighborCandidate {
    seriesId: string;
    stationId: string;
    correlation: CorrelationResponse | null;
}

const MAX_CANDIDATES = 8;

export async function mountFillWizard(host: HTMLElement, ctx: AppCtx): Promise<void> {
    const seriesId = ctx.store.get().selectedSeriesId;
    if (!seriesId) {
        host.innerHTML = `<p class="placeholder">Pick a series in the station browser first.</p>`;
        return;
    }

    let info: SeriesInfoJson;
    try {
        info = await ctx.api.seriesInfo(seriesId);
    } catch {
        ctx.banner(`series ${seriesId} could not be loaded`);
        return;
    }

    const machine = new FillWizardMachine();
    let candidates: NeighborCandidate[] | null = null;

    const render = () => {
        const m = machine.model;
        host.innerHTML = `
            <div class="wizard-head">
                <h3>Fill gaps in <code>${seriesId}</code> (version ${info.currentVersion})</h3>
                <span class="wizard-step-tag" data-step="${m.step}">${m.step}</span>
            </div>
            <div class="wizard-body"></div>
            <div class="wizard-footer">
                <button class="wiz-back">Back</button>
                <button class="wiz-next">Next</button>
                <button class="wiz-cancel">Cancel</button>
            </div>
        `;
        const body = host.querySelector<HTMLElement>(".wizard-body")!;
        const backBtn = host.querySelector<HTMLButtonElement>(".wiz-back")!;
        const nextBtn = host.querySelector<HTMLButtonElement>(".wiz-next")!;
        const cancelBtn = host.querySelector<HTMLButtonElement>(".wiz-cancel")!;

        backBtn.addEventListener("click", () => {
            machine.back();
            render();
        });
        cancelBtn.addEventListener("click", () => {
            machine.cancel();
            render();
        });
        nextBtn.addEventListener("click", async () => {
            if (!machine.canAdvance()) {
                return;
            }
            readParamInputs(body, machine);
            const step = machine.next();
            render();
            if (step === "neighbors" && candidates === null) {
                await loadCandidates();
                render();
            }
            if (step === "preview") {
                await loadPreview();
            }
        });

        switch (m.step) {
            case "method":
                renderMethodStep(body, machine);
                backBtn.disabled = true;
                break;
            case "neighbors":
                renderNeighborStep(body, machine, candidates);
                break;
            case "params":
                renderParamStep(body, machine);
                break;
            case "preview":
                body.innerHTML = `<p class="wizard-waiting">computing preview...</p>`;
                nextBtn.disabled = true;
                break;
            case "done":
                body.innerHTML = `
                    <p class="wizard-done">Committed: version
                    <b class="new-version">${info.currentVersion}</b> now current.</p>`;
                nextBtn.disabled = true;
                backBtn.disabled = true;
                cancelBtn.textContent = "Close";
                break;
            case "cancelled":
                body.innerHTML = `<p class="wizard-cancelled">Cancelled. No changes were made.</p>`;
                nextBtn.disabled = true;
                backBtn.disabled = true;
                break;
        }
    };

    const loadCandidates = async () => {
        let rows;
        try {
            rows = await ctx.api.listSeries({ variable: info.variable });
        } catch {
            candidates = [];
            return;
        }
        const others = rows.filter((r) => r.stationId !== info.stationId)
            .slice(0, MAX_CANDIDATES);
        candidates = await Promise.all(others.map(async (r) => {
            try {
                const correlation = await ctx.api.correlate(seriesId, r.id);
                return { seriesId: r.id, stationId: r.stationId, correlation };
            } catch {
                // too little joint data to rank; still selectable
                return { seriesId: r.id, stationId: r.stationId, correlation: null };
            }
        }));
        candidates.sort((a, b) =>
            Math.abs(b.correlation?.r ?? -2) - Math.abs(a.correlation?.r ?? -2));
    };

    const loadPreview = async () => {
        const m = machine.model;
        const parameters: Record<string, unknown> = { ...m.params };
        if (m.method!.usesNeighbors) {
            parameters["neighborSeriesIds"] = m.neighborIds;
        }
        let preview: FillPreviewJson;
        try {
            preview = await ctx.api.fillPreview(
                seriesId, m.method!.id, parameters, info.currentVersion);
        } catch (err) {
            machine.model.step = "params";
            render();
            const body = host.querySelector<HTMLElement>(".wizard-body")!;
            const msg = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
            body.insertAdjacentHTML("afterbegin",
                `<p class="inline-error">${msg}</p>`);
            return;
        }
        m.preview = preview;
        renderPreview(preview, parameters);
    };

    const renderPreview = (preview: FillPreviewJson, parameters: Record<string, unknown>) => {
        const body = host.querySelector<HTMLElement>(".wizard-body")!;
        const nextBtn = host.querySelector<HTMLButtonElement>(".wiz-next")!;
        nextBtn.disabled = true;
        const diag: string[] = [];
        if (typeof preview.parameters["r"] === "number") {
            diag.push(`r = <span class="diag-r" data-raw="${preview.parameters["r"]}">` +
                `${fmtNumber(preview.parameters["r"] as number)}</span>`);
        }
        if (typeof preview.parameters["n"] === "number") {
            diag.push(`n = <span class="diag-n">${preview.parameters["n"]}</span>`);
        }
        body.innerHTML = `
            <p>${preview.fillCount} slot(s) would be filled
            (base version <span class="base-version">${preview.baseVersion}</span>).
            ${diag.length ? "Fit: " + diag.join(", ") : ""}</p>
            <table class="preview-table">
                <thead><tr><th>Date</th><th>Value</th></tr></thead>
                <tbody>
                    ${preview.fills.map(([day, value]) => `
                        <tr class="preview-fill" data-date="${day}" data-value="${value}">
                            <td>${day}</td><td>${fmtNumber(value)}</td>
                        </tr>`).join("")}
                </tbody>
            </table>
            <button class="wiz-commit" ${preview.fillCount === 0 ? "disabled" : ""}>
                Commit as new version</button>
        `;
        body.querySelector(".wiz-commit")!.addEventListener("click", async () => {
            let result;
            try {
                result = await ctx.api.fillCommit(
                    seriesId, machine.model.method!.id, parameters, preview.baseVersion);
            } catch (err) {
                const msg = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
                body.insertAdjacentHTML("afterbegin", `<p class="inline-error">${msg}</p>`);
                return;
            }
            info = await ctx.api.seriesInfo(seriesId);
            machine.finish();
            render();
            host.querySelector(".new-version")!.textContent = String(result.version);
        });
    };

    render();
}

function renderMethodStep(body: HTMLElement, machine: FillWizardMachine): void {
    body.innerHTML = `
        <p>Interpolation method:</p>
        ${FILL_METHODS.map((m) => `
            <label class="method-option">
                <input type="radio" name="fill-method" value="${m.id}"
                    ${machine.model.method?.id === m.id ? "checked" : ""}>
                ${m.label}
            </label>`).join("")}
    `;
    body.querySelectorAll<HTMLInputElement>("input[name=fill-method]").forEach((input) => {
        input.addEventListener("change", () => {
            const def = FILL_METHODS.find((m) => m.id === input.value)!;
            machine.chooseMethod(def);
        });
    });
}

function renderNeighborStep(body: HTMLElement, machine: FillWizardMachine,
                            candidates: NeighborCandidate[] | null): void {
    if (candidates === null) {
        body.innerHTML = `<p class="wizard-waiting">ranking neighbors by correlation...</p>`;
        return;
    }
    if (candidates.length === 0) {
        body.innerHTML = `<p>No neighbor series of the same variable available.</p>`;
        return;
    }
    const threshold = machine.model.params["minAbsR"] ?? 0.7;
    body.innerHTML = `
        <p>Neighbor series, ranked by |r| over the joint days:</p>
        <ul class="neighbor-list">
            ${candidates.map((c) => {
                const r = c.correlation?.r;
                const weak = r !== undefined && Math.abs(r) < threshold;
                return `
                <li>
                    <label>
                        <input type="checkbox" class="neighbor-check" value="${c.seriesId}"
                            ${machine.model.neighborIds.includes(c.seriesId) ? "checked" : ""}>
                        <code>${c.seriesId}</code>
                        ${c.correlation
                            ? `r = ${fmtNumber(c.correlation.r)}, n = ${c.correlation.nJoint}`
                            : "no joint data"}
                        ${weak ? `<span class="weak-warning">|r| below ${threshold}</span>` : ""}
                    </label>
                </li>`;
            }).join("")}
        </ul>
    `;
    body.querySelectorAll<HTMLInputElement>(".neighbor-check").forEach((check) => {
        check.addEventListener("change", () => {
            const ids = machine.model.neighborIds.filter((id) => id !== check.value);
            if (check.checked) {
                ids.push(check.value);
            }
            machine.model.neighborIds = ids;
        });
    });
}

function renderParamStep(body: HTMLElement, machine: FillWizardMachine): void {
    const method = machine.model.method!;
    body.innerHTML = `
        <p>Parameters for ${method.label}:</p>
        ${method.params.map((p) => `
            <label class="param-field">${p.label}
                <input type="number" class="param-input" data-key="${p.key}"
                    step="${p.step ?? 1}" value="${machine.model.params[p.key]}">
            </label>`).join("")}
    `;
}

function readParamInputs(body: HTMLElement, machine: FillWizardMachine): void {
    body.querySelectorAll<HTMLInputElement>(".param-input").forEach((input) => {
        const parsed = Number(input.value);
        if (Number.isFinite(parsed)) {
            machine.model.params[input.dataset.key!] = parsed;
        }
    });
}
