// Entry point: hash routing between the consult view (default) and an
// evaluation session view (#/eval/<session-id>).

import { GatewayApi, resolveGatewayUrl } from "./api.js";
import { mountConsult } from "./consult.js";
import { mountEval } from "./evalsession.js";

export async function boot(win: Window, doc: Document): Promise<void> {
  const root = doc.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const api = new GatewayApi(resolveGatewayUrl(win));

  async function route(): Promise<void> {
    root!.innerHTML = "";
    const hash = win.location.hash;
    const evalMatch = /^#\/eval\/([A-Za-z0-9_.-]+)$/.exec(hash);
    if (evalMatch) {
      const view = await mountEval(doc, api, evalMatch[1]!, win.localStorage);
      root!.appendChild(view.element);
      return;
    }
    root!.appendChild(mountConsult(doc, api).element);
  }

  win.addEventListener("hashchange", () => void route());
  await route();
}

declare const window: Window | undefined;
if (typeof window !== "undefined" && !(window as { __TEST__?: boolean }).__TEST__) {
  void boot(window, window.document);
}
