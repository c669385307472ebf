/**
 * WGSL for the splat pipeline: per-splat transfer-function shading and
 * Blinn-Phong with a camera headlight in the vertex stage, Gaussian
 * falloff with the 1/255 skip and 0.99 clamp in the fragment stage.
 * Splats arrive as instanced quads in a CPU-sorted order and are blended
 * front to back with the under operator; a final full-screen pass lays the
 * background behind the accumulated image.
 */

export const SPLAT_SHADER = /* wgsl */ `
const ALPHA_CLAMP: f32 = 0.99;
const ALPHA_SKIP: f32 = 0.00392156862745098;
const DILATION: f32 = 0.3;
const FRUSTUM_LIMIT: f32 = 1.3;
const BETA_MIN: f32 = 1.0;
const BETA_MAX: f32 = 128.0;
const MAX_TF_POINTS: u32 = 64u;

struct Uniforms {
  cam_right: vec3<f32>, width: f32,
  cam_up: vec3<f32>, height: f32,
  cam_forward: vec3<f32>, focal: f32,
  cam_pos: vec3<f32>, tan_half_fovy: f32,
  n_opacity: u32, n_color: u32, specular_enabled: u32, _pad: u32,
}

struct TfTables {
  // x = knot position; opacity in y; colors in separate rows
  opacity: array<vec2<f32>, MAX_TF_POINTS>,
  color: array<vec4<f32>, MAX_TF_POINTS>, // (t, r, g, b)
}

struct Splat {
  pos: vec3<f32>, raw_value: f32,
  log_scale: vec3<f32>, raw_weight: f32,
  rot: vec4<f32>,
  normal: vec3<f32>, raw_ka: f32,
  raw_kd: f32, raw_ks: f32, raw_beta: f32, _pad: f32,
}

@group(0) @binding(0) var<uniform> u: Uniforms;
@group(0) @binding(1) var<storage, read> splats: array<Splat>;
@group(0) @binding(2) var<storage, read> order: array<u32>;
@group(0) @binding(3) var<uniform> tf: TfTables;

fn sigmoid(x: f32) -> f32 { return 1.0 / (1.0 + exp(-x)); }

fn eval_opacity(v: f32) -> f32 {
  let x = clamp(v, 0.0, 1.0);
  if (x <= tf.opacity[0].x) { return tf.opacity[0].y; }
  let last = u.n_opacity - 1u;
  if (x >= tf.opacity[last].x) { return tf.opacity[last].y; }
  var lo = 0u;
  var hi = last;
  loop {
    if (hi - lo <= 1u) { break; }
    let mid = (lo + hi) / 2u;
    if (tf.opacity[mid].x <= x) { lo = mid; } else { hi = mid; }
  }
  let a = tf.opacity[lo];
  let b = tf.opacity[lo + 1u];
  let t = (x - a.x) / (b.x - a.x);
  return mix(a.y, b.y, t);
}

fn eval_color(v: f32) -> vec3<f32> {
  let x = clamp(v, 0.0, 1.0);
  if (x <= tf.color[0].x) { return tf.color[0].yzw; }
  let last = u.n_color - 1u;
  if (x >= tf.color[last].x) { return tf.color[last].yzw; }
  var lo = 0u;
  var hi = last;
  loop {
    if (hi - lo <= 1u) { break; }
    let mid = (lo + hi) / 2u;
    if (tf.color[mid].x <= x) { lo = mid; } else { hi = mid; }
  }
  let a = tf.color[lo];
  let b = tf.color[lo + 1u];
  let t = (x - a.x) / (b.x - a.x);
  return mix(a.yzw, b.yzw, t);
}

fn quat_mat(q_in: vec4<f32>) -> mat3x3<f32> {
  let q = normalize(q_in);
  let w = q.x; let x = q.y; let y = q.z; let z = q.w;
  return mat3x3<f32>(
    vec3<f32>(1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y)),
    vec3<f32>(2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z + w * x)),
    vec3<f32>(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y)),
  );
}

struct VsOut {
  @builtin(position) clip: vec4<f32>,
  @location(0) d_px: vec2<f32>,      // pixel offset from the splat mean
  @location(1) conic: vec3<f32>,
  @location(2) color: vec3<f32>,
  @location(3) alpha_base: f32,
}

const CORNERS = array<vec2<f32>, 4>(
  vec2<f32>(-1.0, -1.0), vec2<f32>(1.0, -1.0), vec2<f32>(-1.0, 1.0), vec2<f32>(1.0, 1.0),
);

@vertex
fn vs_main(@builtin(vertex_index) vid: u32, @builtin(instance_index) inst: u32) -> VsOut {
  var out: VsOut;
  let sp = splats[order[inst]];

  // transfer-function mapping and headlight Blinn-Phong
  let v = sigmoid(sp.raw_value);
  let w = sigmoid(sp.raw_weight);
  let alpha_base = eval_opacity(v) * w;

  let light = normalize(u.cam_pos - sp.pos);
  let n = normalize(sp.normal);
  let s = abs(dot(n, light));
  let ka = sigmoid(sp.raw_ka);
  let kd = sigmoid(sp.raw_kd);
  let ks = sigmoid(sp.raw_ks);
  let beta = clamp(exp(sp.raw_beta), BETA_MIN, BETA_MAX);
  var color = (ka + kd * s) * eval_color(v);
  if (u.specular_enabled != 0u && s > 0.0) {
    color += vec3<f32>(ks * pow(s, beta));
  }

  // view-space position, +forward depth
  let rel = sp.pos - u.cam_pos;
  let t = vec3<f32>(dot(u.cam_right, rel), dot(u.cam_up, rel), dot(u.cam_forward, rel));
  if (t.z <= 1e-4 || alpha_base < ALPHA_SKIP) {
    out.clip = vec4<f32>(0.0, 0.0, 2.0, 1.0); // clipped away
    return out;
  }

  let lim_x = FRUSTUM_LIMIT * u.tan_half_fovy * (u.width / u.height);
  let lim_y = FRUSTUM_LIMIT * u.tan_half_fovy;
  let txz = t.x / t.z;
  let tyz = t.y / t.z;
  let txc = clamp(txz, -lim_x, lim_x) * t.z;
  let tyc = clamp(tyz, -lim_y, lim_y) * t.z;
  let mean = vec2<f32>(0.5 * u.width + u.focal * txz, 0.5 * u.height - u.focal * tyz);

  let r = quat_mat(sp.rot);   // columns are the rotated axes
  let s2 = exp(2.0 * sp.log_scale);
  let sigma = r * mat3x3<f32>(
    vec3<f32>(s2.x, 0.0, 0.0), vec3<f32>(0.0, s2.y, 0.0), vec3<f32>(0.0, 0.0, s2.z),
  ) * transpose(r);

  let inv_z = 1.0 / t.z;
  let inv_z2 = inv_z * inv_z;
  let m0 = u.focal * inv_z * u.cam_right - u.focal * txc * inv_z2 * u.cam_forward;
  let m1 = -u.focal * inv_z * u.cam_up + u.focal * tyc * inv_z2 * u.cam_forward;
  let cov_a = dot(m0, sigma * m0) + DILATION;
  let cov_b = dot(m0, sigma * m1);
  let cov_c = dot(m1, sigma * m1) + DILATION;
  let det = cov_a * cov_c - cov_b * cov_b;
  if (det <= 0.0) {
    out.clip = vec4<f32>(0.0, 0.0, 2.0, 1.0);
    return out;
  }
  let inv_det = 1.0 / det;
  out.conic = vec3<f32>(cov_c * inv_det, -cov_b * inv_det, cov_a * inv_det);
  out.color = color;
  out.alpha_base = alpha_base;

  // quad large enough to contain the 1/255 level set
  let mid = 0.5 * (cov_a + cov_c);
  let lam_max = mid + sqrt(max(mid * mid - det, 0.0));
  let radius = sqrt(max(lam_max, 0.0) * 2.0 * log(max(alpha_base, ALPHA_SKIP) / ALPHA_SKIP)) + 0.5;

  let corner = CORNERS[vid];
  out.d_px = corner * radius;
  let px = mean + out.d_px;
  let ndc = vec2<f32>(2.0 * px.x / u.width - 1.0, 1.0 - 2.0 * px.y / u.height);
  // depth is irrelevant (no z-test); park the quad on a fixed plane
  out.clip = vec4<f32>(ndc, 0.5, 1.0);
  return out;
}

@fragment
fn fs_main(in: VsOut) -> @location(0) vec4<f32> {
  let d = in.d_px;
  let pw = -0.5 * (in.conic.x * d.x * d.x + in.conic.z * d.y * d.y) - in.conic.y * d.x * d.y;
  var alpha = in.alpha_base * exp(pw);
  if (alpha < ALPHA_SKIP) { discard; }
  alpha = min(alpha, ALPHA_CLAMP);
  // under operator: premultiplied source against ONE_MINUS_DST_ALPHA
  return vec4<f32>(in.color * alpha, alpha);
}
`;

export const BACKGROUND_SHADER = /* wgsl */ `
struct BgUniform { color: vec4<f32> }
@group(0) @binding(0) var<uniform> bg: BgUniform;

@vertex
fn vs_main(@builtin(vertex_index) vid: u32) -> @builtin(position) vec4<f32> {
  var corners = array<vec2<f32>, 4>(
    vec2<f32>(-1.0, -1.0), vec2<f32>(1.0, -1.0), vec2<f32>(-1.0, 1.0), vec2<f32>(1.0, 1.0),
  );
  return vec4<f32>(corners[vid], 0.999, 1.0);
}

@fragment
fn fs_main() -> @location(0) vec4<f32> {
  return vec4<f32>(bg.color.rgb, 1.0);
}
`;
