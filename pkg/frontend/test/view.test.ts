import { describe, expect, it } from "vitest";

import { brushSchema, outbound } from "../src/protocol.js";
import {
  cameraBasis,
  defaultView,
  dollyCamera,
  orbitCamera,
  pixelRay,
  pointerToSample,
  roomCamera,
} from "../src/view.js";

const dot = (a: number[], b: number[]) =>
  a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
const sub = (a: number[], b: number[]) =>
  [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const norm = (a: number[]) => Math.hypot(a[0], a[1], a[2]);

describe("pointerToSample", () => {
  it("maps the screen center to eye + depth * view direction", () => {
    const view = defaultView(100, 100);
    view.paintDepth = 500;
    const { forward } = cameraBasis(view.camera);
    const s = pointerToSample(49.5, 49.5, view, undefined);
    const expected = view.camera.eye.map((e, i) => e + 500 * forward[i]);
    for (let i = 0; i < 3; i++) expect(s.pos[i]).toBeCloseTo(expected[i], 6);
    expect(s.pressure).toBe(1.0);
    expect(s.zoom).toBe(view.zoom);
  });

  it("same pixel at two depths moves along that pixel's ray only", () => {
    const view = defaultView(128, 128);
    view.paintDepth = 300;
    const a = pointerToSample(20, 90, view, 0.5);
    view.paintDepth = 900;
    const b = pointerToSample(20, 90, view, 0.5);
    const delta = sub(b.pos, a.pos);
    const ray = pixelRay(view.camera, 20, 90);
    const cos = dot(delta, ray) / norm(delta);
    expect(cos).toBeCloseTo(1.0, 9); // collinear with the pixel ray
    expect(a.pressure).toBe(0.5);
  });

  it("keeps samples on the paint plane", () => {
    const view = defaultView(64, 64);
    view.paintDepth = 1234;
    const { forward } = cameraBasis(view.camera);
    for (const [x, y] of [[0, 0], [63, 0], [10, 55], [32, 32]] as const) {
      const s = pointerToSample(x, y, view, undefined);
      const depth = dot(sub(s.pos, view.camera.eye), forward);
      expect(depth).toBeCloseTo(1234, 6);
    }
  });

  it("clamps missing or zero pen pressure to 1", () => {
    const view = defaultView();
    expect(pointerToSample(1, 1, view, undefined).pressure).toBe(1);
    expect(pointerToSample(1, 1, view, 0).pressure).toBe(1);
    expect(pointerToSample(1, 1, view, 0.3).pressure).toBe(0.3);
  });
});

describe("camera gestures", () => {
  it("orbit preserves distance to the look point", () => {
    const cam = defaultView().camera;
    const r0 = norm(sub(cam.eye, cam.look));
    const cam2 = orbitCamera(cam, 0.5, -0.2);
    expect(norm(sub(cam2.eye, cam2.look))).toBeCloseTo(r0, 6);
  });

  it("dolly scales the distance", () => {
    const cam = defaultView().camera;
    const r0 = norm(sub(cam.eye, cam.look));
    const cam2 = dollyCamera(cam, 0.5);
    expect(norm(sub(cam2.eye, cam2.look))).toBeCloseTo(r0 / 2, 6);
  });

  it("camera basis is orthonormal", () => {
    const { forward, right, up } = cameraBasis(defaultView().camera);
    expect(norm(forward)).toBeCloseTo(1, 9);
    expect(norm(right)).toBeCloseTo(1, 9);
    expect(norm(up)).toBeCloseTo(1, 9);
    expect(dot(forward, right)).toBeCloseTo(0, 9);
    expect(dot(forward, up)).toBeCloseTo(0, 9);
  });

  it("room camera looks at the room center", () => {
    const cam = roomCamera({ min: [0, 0, 0], max: [10, 10, 10], scale: 1 },
                           256, 256);
    expect(cam.look).toEqual([5, 5, 5]);
    expect(norm(sub(cam.eye, cam.look))).toBeGreaterThan(1);
  });
});

describe("wire schema validation", () => {
  it("accepts a valid brush and rejects bad ones", () => {
    const good = {
      shape: "sphere", radius: 2.5, rgba: [1, 0, 0, 0.5],
      mode: "paint", pickup_strength: 0, noise_seed: 0,
    };
    expect(brushSchema.parse(good)).toBeTruthy();
    expect(() => brushSchema.parse({ ...good, radius: -1 })).toThrow();
    expect(() => brushSchema.parse({ ...good, rgba: [2, 0, 0, 1] })).toThrow();
    expect(() => brushSchema.parse({ ...good, mode: "smear" })).toThrow();
  });

  it("rejects out-of-range stroke samples before sending", () => {
    expect(() =>
      outbound.parse({ type: "stroke_sample", pos: [0, 0, 0], pressure: 1.5, zoom: 1 }),
    ).toThrow();
    expect(() =>
      outbound.parse({ type: "stroke_sample", pos: [0, 0, 0], pressure: 1, zoom: 0 }),
    ).toThrow();
    expect(
      outbound.parse({ type: "stroke_sample", pos: [1, 2, 3], pressure: 1, zoom: 2 }),
    ).toBeTruthy();
  });
});
