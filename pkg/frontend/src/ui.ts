/**
 * DOM controls and pointer handling for the paint client.
 *
 * Painting happens on a view-aligned plane whose distance is adjusted with
 * the mouse wheel; shift+wheel dollies the camera, right-drag orbits,
 * middle-drag pans. The color picker is a hue/saturation square plus a
 * value slider; alpha and radius have their own sliders; rooms teleport on
 * click. Server errors surface as toasts.
 */

import { CanvoxClient } from "./client.js";
import { Brush, Room } from "./protocol.js";
import {
  ViewState,
  defaultView,
  dollyCamera,
  orbitCamera,
  panCamera,
  pointerToSample,
  roomCamera,
} from "./view.js";

const SHAPES = ["sphere", "cylinder", "box", "cone", "perlin"] as const;
const MODES = ["paint", "erase", "recolor"] as const;

function hsvToRgb(h: number, s: number, v: number): [number, number, number] {
  const i = Math.floor(h * 6);
  const f = h * 6 - i;
  const p = v * (1 - s);
  const q = v * (1 - f * s);
  const t = v * (1 - (1 - f) * s);
  switch (i % 6) {
    case 0: return [v, t, p];
    case 1: return [q, v, p];
    case 2: return [p, v, t];
    case 3: return [p, q, v];
    case 4: return [t, p, v];
    default: return [v, p, q];
  }
}

export class PaintUI {
  view: ViewState;
  hue = 0.08;
  sat = 0.9;
  val = 0.95;
  alpha = 0.8;
  radius = 200; // view units; the server scales by zoom
  shape: (typeof SHAPES)[number] = "sphere";
  mode: (typeof MODES)[number] = "paint";
  private painting = false;
  private orbiting = false;
  private panning = false;
  private lastPointer: [number, number] = [0, 0];
  private frameImg: HTMLImageElement;
  private statsEl: HTMLElement;
  private roomsEl: HTMLElement;
  private toastEl: HTMLElement;

  constructor(private client: CanvoxClient, private rootEl: HTMLElement) {
    this.view = defaultView();
    this.frameImg = document.createElement("img");
    this.statsEl = document.createElement("div");
    this.roomsEl = document.createElement("div");
    this.toastEl = document.createElement("div");
    this.buildDom();
    client["events"].frame = (seq, png) => this.showFrame(seq, png);
    client["events"].hello = (_cfg, rooms) => this.renderRooms(rooms);
    client["events"].stats = (s) => this.renderStats(s);
    client["events"].error = (_c, msg) => this.toast(msg);
    client["events"].open = () => {
      this.view.connected = true;
      this.pushBrush();
      this.pushCamera();
    };
    client["events"].close = () => {
      this.view.connected = false;
      this.toast("disconnected");
    };
  }

  // -- outbound state -------------------------------------------------------

  brush(): Brush {
    const [r, g, b] = hsvToRgb(this.hue, this.sat, this.val);
    return {
      shape: this.shape,
      radius: this.radius,
      rgba: [r, g, b, this.alpha],
      mode: this.mode,
      pickup_strength: 0,
      noise_seed: 7,
    };
  }

  pushBrush(): boolean {
    if (this.mode === "paint" && this.alpha <= 0) {
      this.toast("paint mode needs alpha > 0");
      return false;
    }
    this.client.setBrush(this.brush());
    return true;
  }

  pushCamera(): void {
    const c = this.view.camera;
    this.client.send({
      type: "set_camera",
      eye: c.eye,
      look: c.look,
      up: c.up,
      fov: c.fovDeg,
      size: [c.width, c.height],
    });
  }

  teleport(room: Room): void {
    this.view.camera = roomCamera(room, this.view.camera.width,
                                  this.view.camera.height);
    this.client.teleport(room.name);
  }

  // -- pointer handling ------------------------------------------------------

  onPointerDown(ev: PointerEvent): void {
    if (!this.view.connected) return;
    if (ev.button === 2) {
      this.orbiting = true;
    } else if (ev.button === 1) {
      this.panning = true;
    } else {
      if (!this.pushBrush()) return;
      this.painting = true;
      this.client.send({ type: "stroke_begin" });
      this.sendSample(ev);
    }
    this.lastPointer = [ev.offsetX, ev.offsetY];
  }

  onPointerMove(ev: PointerEvent): void {
    if (this.painting) {
      this.sendSample(ev);
    } else if (this.orbiting) {
      const [lx, ly] = this.lastPointer;
      this.view.camera = orbitCamera(this.view.camera,
                                     (ev.offsetX - lx) * 0.005,
                                     (ev.offsetY - ly) * 0.005);
      this.pushCamera();
    } else if (this.panning) {
      const [lx, ly] = this.lastPointer;
      const s = this.view.paintDepth * 0.002;
      this.view.camera = panCamera(this.view.camera,
                                   -(ev.offsetX - lx) * s,
                                   (ev.offsetY - ly) * s);
      this.pushCamera();
    }
    this.lastPointer = [ev.offsetX, ev.offsetY];
  }

  onPointerUp(): void {
    if (this.painting) {
      this.client.send({ type: "stroke_end" });
      this.painting = false;
    }
    this.orbiting = false;
    this.panning = false;
  }

  onWheel(ev: WheelEvent): void {
    ev.preventDefault();
    const factor = ev.deltaY > 0 ? 1.12 : 1 / 1.12;
    if (ev.shiftKey) {
      this.view.camera = dollyCamera(this.view.camera, factor);
      this.view.zoom *= factor;
      this.pushCamera();
    } else {
      this.view.paintDepth = Math.max(this.view.paintDepth * factor, 0.001);
      this.toast(`paint depth ${this.view.paintDepth.toFixed(1)} m`, 600);
    }
  }

  private sendSample(ev: PointerEvent): void {
    const raw = (ev as { pressure?: number }).pressure;
    const msg = pointerToSample(ev.offsetX, ev.offsetY, this.view, raw);
    this.client.send(msg);
  }

  // -- inbound rendering -------------------------------------------------------

  private showFrame(seq: number, png: Uint8Array): void {
    this.view.lastFrameSeq = seq;
    const src = this.frameImg.src;
    const copy = new Uint8Array(png);
    this.frameImg.src = URL.createObjectURL(
      new Blob([copy.buffer], { type: "image/png" }));
    if (src.startsWith("blob:")) URL.revokeObjectURL(src);
  }

  private renderRooms(rooms: Room[]): void {
    this.roomsEl.textContent = "";
    const title = document.createElement("div");
    title.textContent = "rooms";
    title.className = "section-title";
    this.roomsEl.appendChild(title);
    for (const room of rooms) {
      const btn = document.createElement("button");
      btn.textContent = room.name;
      btn.onclick = () => this.teleport(room);
      this.roomsEl.appendChild(btn);
    }
  }

  private renderStats(s: Record<string, number>): void {
    this.statsEl.textContent =
      `cells ${s.cells}  pool ${Number(s.pool_pct).toFixed(2)}%  ` +
      `frame #${this.view.lastFrameSeq}  samples ${s.samples_echo}`;
  }

  toast(msg: string, ms = 2500): void {
    this.toastEl.textContent = msg;
    this.toastEl.style.opacity = "1";
    setTimeout(() => (this.toastEl.style.opacity = "0"), ms);
  }

  // -- DOM assembly --------------------------------------------------------------

  private buildDom(): void {
    const viewport = document.createElement("div");
    viewport.className = "viewport";
    this.frameImg.width = this.view.camera.width;
    this.frameImg.height = this.view.camera.height;
    this.frameImg.draggable = false;
    viewport.appendChild(this.frameImg);
    viewport.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    viewport.addEventListener("pointermove", (e) => this.onPointerMove(e));
    viewport.addEventListener("pointerup", () => this.onPointerUp());
    viewport.addEventListener("pointerleave", () => this.onPointerUp());
    viewport.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
    viewport.addEventListener("contextmenu", (e) => e.preventDefault());

    const panel = document.createElement("div");
    panel.className = "panel";

    // hue/saturation square + value slider
    const picker = document.createElement("canvas");
    picker.width = 128;
    picker.height = 128;
    picker.className = "picker";
    const redraw = () => {
      const ctx = picker.getContext("2d")!;
      const img = ctx.createImageData(128, 128);
      for (let y = 0; y < 128; y++) {
        for (let x = 0; x < 128; x++) {
          const [r, g, b] = hsvToRgb(x / 127, 1 - y / 127, this.val);
          const o = (y * 128 + x) * 4;
          img.data[o] = r * 255;
          img.data[o + 1] = g * 255;
          img.data[o + 2] = b * 255;
          img.data[o + 3] = 255;
        }
      }
      ctx.putImageData(img, 0, 0);
    };
    picker.addEventListener("pointerdown", (e) => {
      this.hue = e.offsetX / 127;
      this.sat = 1 - e.offsetY / 127;
      this.pushBrush();
    });
    redraw();

    const slider = (label: string, min: number, max: number, step: number,
                    value: number, oninput: (v: number) => void) => {
      const wrap = document.createElement("label");
      wrap.textContent = label;
      const el = document.createElement("input");
      el.type = "range";
      el.min = String(min);
      el.max = String(max);
      el.step = String(step);
      el.value = String(value);
      el.addEventListener("input", () => oninput(Number(el.value)));
      wrap.appendChild(el);
      return wrap;
    };

    const select = (label: string, options: readonly string[],
                    oninput: (v: string) => void) => {
      const wrap = document.createElement("label");
      wrap.textContent = label;
      const el = document.createElement("select");
      for (const o of options) {
        const opt = document.createElement("option");
        opt.value = o;
        opt.textContent = o;
        el.appendChild(opt);
      }
      el.addEventListener("input", () => oninput(el.value));
      wrap.appendChild(el);
      return wrap;
    };

    panel.appendChild(picker);
    panel.appendChild(slider("value", 0, 1, 0.01, this.val, (v) => {
      this.val = v;
      redraw();
      this.pushBrush();
    }));
    panel.appendChild(slider("alpha", 0, 1, 0.01, this.alpha, (v) => {
      this.alpha = v;
      this.pushBrush();
    }));
    panel.appendChild(slider("radius (log m)", -2, 3.5, 0.05,
                             Math.log10(this.radius), (v) => {
      this.radius = 10 ** v;
      this.pushBrush();
    }));
    panel.appendChild(select("stamp", SHAPES, (v) => {
      this.shape = v as (typeof SHAPES)[number];
      this.pushBrush();
    }));
    panel.appendChild(select("mode", MODES, (v) => {
      this.mode = v as (typeof MODES)[number];
      this.pushBrush();
    }));
    panel.appendChild(this.roomsEl);
    panel.appendChild(this.statsEl);
    this.statsEl.className = "stats";
    this.toastEl.className = "toast";

    this.rootEl.appendChild(viewport);
    this.rootEl.appendChild(panel);
    this.rootEl.appendChild(this.toastEl);
  }
}
