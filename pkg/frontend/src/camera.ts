/**
 * Orbit camera: azimuth/elevation/radius around a target, matching the
 * training-side conventions (right-handed look-at, -z forward in view
 * space, OpenGL projection, pixel (0,0) top-left, centers at half-pixels).
 */

export type Vec3 = [number, number, number];

export interface OrbitState {
  azimuth: number; // radians
  elevation: number;
  radius: number;
  target: Vec3;
  fovY: number;
  width: number;
  height: number;
  fittedRadius: number;
}

const ELEVATION_LIMIT = Math.PI / 2 - 0.01;
export const RADIUS_MIN_FACTOR = 0.1;
export const RADIUS_MAX_FACTOR = 100.0;

export function orbitPosition(s: OrbitState): Vec3 {
  const ce = Math.cos(s.elevation);
  return [
    s.target[0] + s.radius * ce * Math.cos(s.azimuth),
    s.target[1] + s.radius * Math.sin(s.elevation),
    s.target[2] + s.radius * ce * Math.sin(s.azimuth),
  ];
}

export function applyOrbitDrag(s: OrbitState, dAzimuth: number, dElevation: number): OrbitState {
  return {
    ...s,
    azimuth: s.azimuth + dAzimuth,
    elevation: Math.min(ELEVATION_LIMIT, Math.max(-ELEVATION_LIMIT, s.elevation + dElevation)),
  };
}

export function applyZoom(s: OrbitState, factor: number): OrbitState {
  const lo = RADIUS_MIN_FACTOR * s.fittedRadius;
  const hi = RADIUS_MAX_FACTOR * s.fittedRadius;
  return { ...s, radius: Math.min(hi, Math.max(lo, s.radius * factor)) };
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function normalize(a: Vec3): Vec3 {
  const n = Math.hypot(a[0], a[1], a[2]);
  return [a[0] / n, a[1] / n, a[2] / n];
}

export interface CameraBasis {
  position: Vec3;
  right: Vec3;
  up: Vec3;
  forward: Vec3; // toward the target; positive depth in front
  focalPx: number;
}

export function cameraBasis(position: Vec3, target: Vec3, fovY: number, width: number,
                            height: number, worldUp: Vec3 = [0, 1, 0]): CameraBasis {
  const forward = normalize(sub(target, position));
  const right = normalize(cross(forward, worldUp));
  const up = cross(right, forward);
  return { position, right, up, forward, focalPx: 0.5 * height / Math.tan(0.5 * fovY) };
}

export function orbitCamera(s: OrbitState): CameraBasis {
  return cameraBasis(orbitPosition(s), s.target, s.fovY, s.width, s.height);
}

/** Column-major view and projection matrices for the GPU path. */
export function viewMatrix(c: CameraBasis): Float32Array {
  const m = new Float32Array(16);
  const rows = [c.right, c.up, [-c.forward[0], -c.forward[1], -c.forward[2]] as Vec3];
  for (let r = 0; r < 3; r++) {
    m[r] = rows[r][0];
    m[4 + r] = rows[r][1];
    m[8 + r] = rows[r][2];
    m[12 + r] = -(rows[r][0] * c.position[0] + rows[r][1] * c.position[1] + rows[r][2] * c.position[2]);
  }
  m[15] = 1;
  return m;
}

export function projectionMatrix(fovY: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(0.5 * fovY);
  const m = new Float32Array(16);
  m[0] = f / aspect;
  m[5] = f;
  m[10] = (far + near) / (near - far);
  m[11] = -1;
  m[14] = (2 * far * near) / (near - far);
  return m;
}
