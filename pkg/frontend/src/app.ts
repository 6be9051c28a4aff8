/**
 * Application shell: login box, panel tabs, error banner and panel
 * mounting. One state store drives everything; panels re-mount when the
 * active panel changes.
 */

import { ApiClient, ApiError } from "./api.js";
import { mountAvailability } from "./availability.js";
import type { AppCtx } from "./ctx.js";
import { mountExportPanel } from "./exportpanel.js";
import { mountSeriesPlot } from "./plot.js";
import { mountStationBrowser } from "./stations.js";
import { mountFillWizard } from "./wizard.js";
import type { PanelId } from "./state.js";
import { Store } from "./state.js";

const PANELS: { id: PanelId; label: string }[] = [
    { id: "map-list", label: "Stations" },
    { id: "plot", label: "Plot" },
    { id: "availability", label: "Availability" },
    { id: "fill-wizard", label: "Fill gaps" },
    { id: "export", label: "Export" },
];

const MOUNTERS: Record<PanelId, (host: HTMLElement, ctx: AppCtx) => Promise<void>> = {
    "map-list": mountStationBrowser,
    "plot": mountSeriesPlot,
    "availability": mountAvailability,
    "fill-wizard": mountFillWizard,
    "export": mountExportPanel,
};

export function startApp(root: HTMLElement, api: ApiClient, store: Store): void {
    root.innerHTML = `
        <header class="app-header">
            <h1>River basin data portal</h1>
            <div class="auth-box"></div>
        </header>
        <div class="error-banner" hidden>
            <span class="error-text"></span>
            <button class="error-dismiss">dismiss</button>
        </div>
        <nav class="panel-tabs"></nav>
        <main class="panel-host"></main>
    `;

    const banner = root.querySelector<HTMLElement>(".error-banner")!;
    const bannerText = banner.querySelector<HTMLElement>(".error-text")!;
    banner.querySelector(".error-dismiss")!.addEventListener("click", () => {
        banner.hidden = true;
    });
    const showBanner = (message: string) => {
        bannerText.textContent = message;
        banner.hidden = false;
    };

    api.onError = (err: ApiError) => {
        // 401/403/404 are part of normal permission-scoped browsing
        if (err.status >= 500) {
            showBanner(`service error: ${err.message}`);
        }
    };

    const ctx: AppCtx = { api, store, banner: showBanner };
    const tabs = root.querySelector<HTMLElement>(".panel-tabs")!;
    const panelHost = root.querySelector<HTMLElement>(".panel-host")!;
    const authBox = root.querySelector<HTMLElement>(".auth-box")!;

    for (const panel of PANELS) {
        const btn = root.ownerDocument.createElement("button");
        btn.textContent = panel.label;
        btn.dataset.panel = panel.id;
        btn.addEventListener("click", () => store.set({ panel: panel.id }));
        tabs.appendChild(btn);
    }

    const renderAuth = () => {
        const user = store.get().user;
        if (user) {
            authBox.innerHTML = `
                <span class="auth-user">${user.username}</span>
                <button class="auth-logout">Log out</button>`;
            authBox.querySelector(".auth-logout")!.addEventListener("click", async () => {
                try {
                    await api.logout();
                } catch {
                    // token may already be gone; local sign-out regardless
                }
                store.set({ user: null });
            });
        } else {
            authBox.innerHTML = `
                <input class="auth-name" placeholder="username">
                <input class="auth-pass" type="password" placeholder="password">
                <button class="auth-login">Log in</button>
                <span class="auth-anon">(browsing anonymously)</span>`;
            authBox.querySelector(".auth-login")!.addEventListener("click", async () => {
                const username = authBox.querySelector<HTMLInputElement>(".auth-name")!.value;
                const password = authBox.querySelector<HTMLInputElement>(".auth-pass")!.value;
                try {
                    const out = await api.login(username, password);
                    store.set({ user: out.user });
                } catch (err) {
                    showBanner(err instanceof ApiError
                        ? `login failed: ${err.message}` : String(err));
                }
            });
        }
    };

    let mountedPanel: PanelId | null = null;
    let lastUser = store.get().user;
    const sync = () => {
        const state = store.get();
        tabs.querySelectorAll<HTMLButtonElement>("button").forEach((btn) => {
            btn.classList.toggle("active", btn.dataset.panel === state.panel);
        });
        if (state.user !== lastUser) {
            lastUser = state.user;
            renderAuth();
            mountedPanel = null;
        }
        if (state.panel !== mountedPanel) {
            mountedPanel = state.panel;
            panelHost.dataset.panel = state.panel;
            panelHost.innerHTML = "";
            const section = root.ownerDocument.createElement("section");
            section.className = `panel panel-${state.panel}`;
            panelHost.appendChild(section);
            void MOUNTERS[state.panel](section, ctx);
        }
    };

    store.subscribe(sync);
    renderAuth();
    sync();
}
