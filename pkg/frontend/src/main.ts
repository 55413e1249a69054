/** Browser entry point: connect to the service and build the UI. */

import { CanvoxClient } from "./client.js";
import { PaintUI } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const url = params.get("server") ?? "ws://127.0.0.1:8765";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const client = new CanvoxClient(url, {});
const ui = new PaintUI(client, root);
client.connect();

(window as unknown as Record<string, unknown>).canvox = { client, ui };
