/**
 * View state and the pointer-to-canvas mapping.
 *
 * Mouse/pen input is 2D, so strokes land on a view-aligned plane at an
 * adjustable distance (paint_depth) in front of the eye: the pixel ray is
 * unprojected to the point where it pierces that plane. The depth wheel
 * slides the plane, zoom scales both brush radius (server side) and the
 * orbit distance.
 */

import { Vec3 } from "./protocol.js";

export interface CameraState {
  eye: Vec3;
  look: Vec3;
  up: Vec3;
  fovDeg: number;
  width: number;
  height: number;
}

export interface ViewState {
  camera: CameraState;
  paintDepth: number; // meters along the view axis
  zoom: number;
  lastFrameSeq: number;
  connected: boolean;
}

export function defaultView(width = 256, height = 256): ViewState {
  return {
    camera: {
      eye: [-12000, 2000, 3000],
      look: [0, 0, 0],
      up: [0, 1, 0],
      fovDeg: 60,
      width,
      height,
    },
    paintDepth: 8000,
    zoom: 1.0,
    lastFrameSeq: 0,
    connected: false,
  };
}

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const add = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
const scale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];
const dot = (a: Vec3, b: Vec3) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const norm = (a: Vec3) => Math.sqrt(dot(a, a));
const normalize = (a: Vec3): Vec3 => scale(a, 1 / norm(a));

export function cameraBasis(cam: CameraState) {
  const forward = normalize(sub(cam.look, cam.eye));
  let right = cross(forward, cam.up);
  if (norm(right) < 1e-9) {
    right = cross(forward, Math.abs(forward[1]) > 0.9 ? [0, 0, 1] : [0, 1, 0]);
  }
  right = normalize(right);
  const up = cross(right, forward);
  return { forward, right, up };
}

/** Unit direction through a pixel center (matches the server's camera). */
export function pixelRay(cam: CameraState, px: number, py: number): Vec3 {
  const { forward, right, up } = cameraBasis(cam);
  const u = ((px + 0.5) / cam.width) * 2 - 1;
  const v = 1 - ((py + 0.5) / cam.height) * 2;
  const th = Math.tan(((cam.fovDeg * Math.PI) / 180) / 2);
  const aspect = cam.width / cam.height;
  const d = add(
    forward,
    add(scale(right, th * u * aspect), scale(up, th * v)),
  );
  return normalize(d);
}

/**
 * Map a pointer event to a stroke-sample message: the pixel ray, cut by the
 * plane at paintDepth along the view axis. Pressure from the pen when the
 * browser reports one, else 1.
 */
export function pointerToSample(
  screenX: number,
  screenY: number,
  view: ViewState,
  pressure: number | undefined,
) {
  const dir = pixelRay(view.camera, screenX, screenY);
  const { forward } = cameraBasis(view.camera);
  const along = dot(dir, forward); // > 0 inside the frustum
  const t = view.paintDepth / along;
  const pos = add(view.camera.eye, scale(dir, t));
  return {
    type: "stroke_sample" as const,
    pos,
    pressure: pressure === undefined || pressure <= 0 ? 1.0 : Math.min(pressure, 1.0),
    zoom: view.zoom,
  };
}

/** Camera preset for a room, mirroring the server's teleport framing. */
export function roomCamera(
  room: { min: Vec3; max: Vec3; scale: number },
  width: number,
  height: number,
  fovDeg = 60,
): CameraState {
  const center: Vec3 = [
    (room.min[0] + room.max[0]) / 2,
    (room.min[1] + room.max[1]) / 2,
    (room.min[2] + room.max[2]) / 2,
  ];
  const diag = norm(sub(room.max, room.min));
  const dist = Math.max(
    ((1.5 * (diag / 2)) / Math.tan(((fovDeg * Math.PI) / 180) / 2)) * room.scale,
    1e-6,
  );
  const dir = normalize([0.35, 0.25, 1.0]);
  return {
    eye: add(center, scale(dir, dist)),
    look: center,
    up: [0, 1, 0],
    fovDeg,
    width,
    height,
  };
}

/** Orbit the camera around its look point (drag gesture). */
export function orbitCamera(cam: CameraState, dYaw: number, dPitch: number): CameraState {
  const offset = sub(cam.eye, cam.look);
  const r = norm(offset);
  let yaw = Math.atan2(offset[0], offset[2]);
  let pitch = Math.asin(Math.max(-1, Math.min(1, offset[1] / r)));
  yaw += dYaw;
  pitch = Math.max(-1.45, Math.min(1.45, pitch + dPitch));
  const eye: Vec3 = [
    cam.look[0] + r * Math.cos(pitch) * Math.sin(yaw),
    cam.look[1] + r * Math.sin(pitch),
    cam.look[2] + r * Math.cos(pitch) * Math.cos(yaw),
  ];
  return { ...cam, eye };
}

/** Dolly toward/away from the look point (zoom gesture). */
export function dollyCamera(cam: CameraState, factor: number): CameraState {
  const offset = sub(cam.eye, cam.look);
  return { ...cam, eye: add(cam.look, scale(offset, factor)) };
}

/** Pan the camera parallel to the image plane. */
export function panCamera(cam: CameraState, dx: number, dy: number): CameraState {
  const { right, up } = cameraBasis(cam);
  const delta = add(scale(right, dx), scale(up, dy));
  return { ...cam, eye: add(cam.eye, delta), look: add(cam.look, delta) };
}
