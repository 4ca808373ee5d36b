import { DashboardSocket } from "./socket.js";
import { DashboardStore, LAYOUTS } from "./store.js";
import { QuestionPanel } from "./question.js";
import type { Layout } from "./types.js";

const DEFAULT_WS = "ws://127.0.0.1:8765/ws/dashboard";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export function bootDashboard(doc: Document, wsUrl = DEFAULT_WS): {
  store: DashboardStore;
  socket: DashboardSocket;
  panel: QuestionPanel;
} {
  const app = doc.getElementById("app") ?? doc.body;
  const header = el(doc, "header");
  const status = el(doc, "span", { "data-role": "conn" }, "disconnected");
  const warnings = el(doc, "ul", { "data-role": "dev-console" });
  const viewHost = el(doc, "main");
  const questionHost = el(doc, "aside", { "data-role": "question-panel" });

  const socket = new DashboardSocket(wsUrl, {
    onConfig: (envelope) => store.receiveConfig(envelope),
    onState: (state) => {
      status.textContent = state;
    },
    onError: (message) => warn(message),
  });
  const store = new DashboardStore(viewHost, {
    onLayoutSwitch: (layout) => socket.emitBehavior({ event: "layout_switch", layout }),
    onWarning: (message) => warn(message),
  });
  const panel = new QuestionPanel(questionHost, (event) => socket.emitBehavior(event));

  function warn(message: string): void {
    const item = el(doc, "li", {}, message);
    warnings.prepend(item);
    while (warnings.children.length > 20) warnings.lastChild?.remove();
  }

  for (const layout of LAYOUTS) {
    const button = el(doc, "button", { "data-switch": layout }, layout);
    button.addEventListener("click", () => store.switchLayout(layout as Layout));
    header.appendChild(button);
  }
  header.appendChild(status);
  app.append(header, viewHost, questionHost, warnings);

  // Sync with the session already in progress before going live.
  const httpBase = wsUrl.replace(/^ws/, "http").replace(/\/ws\/dashboard$/, "");
  void fetch(`${httpBase}/api/state`)
    .then((res) => res.json())
    .then((state: { active?: boolean; layout?: Layout | null }) => {
      if (state.active && state.layout) store.switchLayout(state.layout, true);
    })
    .catch(() => warn("state sync failed; starting from defaults"));

  socket.connect();
  panel.next();
  return { store, socket, panel };
}

declare global {
  interface Window {
    __neuroloopBoot?: ReturnType<typeof bootDashboard>;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && !("vitest" in globalThis)) {
  const params = new URLSearchParams(window.location.search);
  const url = params.get("ws") ?? DEFAULT_WS;
  window.__neuroloopBoot = bootDashboard(document, url);
}
