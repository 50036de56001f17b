use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::appearance::{body_template, default_color};
use super::truth::{scripted_violations, GroundTruth, GtBox, GtTrajectory};
use super::{ScenarioConfig, SynthError, VehicleSpec};
use crate::analytics::{crossings, TrackPath};
use crate::detect::{RotatedBox, Template};
use crate::geometry::Homography;
use crate::imaging::{luma, Frame, RgbFrame};
use crate::Point;

/// Rendered frames plus their ground truth.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub frames: Vec<Frame>,
    /// Present when the scenario asks for color.
    pub color: Option<Vec<RgbFrame>>,
    pub truth: GroundTruth,
}

struct Pose {
    frame: u64,
    world: Point,
    speed_kmh: f64,
    bbox: RotatedBox,
    occluded: bool,
}

fn poses(
    v: &VehicleSpec,
    cfg: &ScenarioConfig,
    to_pixel: &Homography,
) -> Result<Vec<Pose>, SynthError> {
    let body = body_template(v.class);
    let (bw, bh) = (
        body.width() as f64 * v.scale,
        body.height() as f64 * v.scale,
    );
    let last = (v.spawn_frame + v.lifetime()).min(cfg.frames);
    let states: Vec<(Point, Option<Point>)> = (v.spawn_frame..last)
        .map(|f| v.state_at(f - v.spawn_frame, cfg.fps))
        .collect();
    let pixels = states
        .iter()
        .map(|(w, _)| to_pixel.project(*w))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SynthError::InvalidScenario(format!("vehicle {}: {e}", v.id)))?;

    // orientation follows the image-plane displacement; a stopped vehicle keeps
    // its last heading
    let step = |k: usize| -> Option<f64> {
        let (a, b) = (pixels[k], *pixels.get(k + 1)?);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        (dx.hypot(dy) > 1e-12).then(|| dy.atan2(dx))
    };
    let mut heading = v
        .heading_deg
        .map(f64::to_radians)
        .or_else(|| (0..pixels.len()).find_map(step))
        .unwrap_or(0.0);

    let mut out = Vec::with_capacity(pixels.len());
    for (k, (&(world, vel), &px)) in states.iter().zip(&pixels).enumerate() {
        if let Some(h) = step(k) {
            heading = h;
        }
        let frame = v.spawn_frame + k as u64;
        let bbox = RotatedBox::new(px[0], px[1], bw, bh, heading);
        let inside = bbox.corners().iter().all(|c| {
            c[0] >= -0.5
                && c[1] >= -0.5
                && c[0] <= cfg.width as f64 - 0.5
                && c[1] <= cfg.height as f64 - 0.5
        });
        if !inside {
            return Err(SynthError::OutOfFrame {
                vehicle: v.id,
                frame,
            });
        }
        // the final frame has no outgoing step; report the arriving speed
        let vel = vel
            .or_else(|| v.segments.last().map(|s| s.velocity))
            .unwrap_or([0.0, 0.0]);
        out.push(Pose {
            frame,
            world,
            speed_kmh: vel[0].hypot(vel[1]) * 3.6,
            bbox,
            occluded: cfg
                .occlusions
                .iter()
                .any(|o| o.vehicle == v.id && (o.start_frame..=o.end_frame).contains(&frame)),
        });
    }
    Ok(out)
}

/// Static road: base level, fixed texture and painted markings.
fn background(cfg: &ScenarioConfig) -> Vec<u8> {
    let bg = &cfg.background;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t = bg.texture as i16;
    let mut data: Vec<u8> = (0..cfg.width * cfg.height)
        .map(|_| {
            let n = if t > 0 { rng.gen_range(-t..=t) } else { 0 };
            (bg.level as i16 + n).clamp(0, 255) as u8
        })
        .collect();
    for m in &bg.markings {
        let (dx, dy) = (m.to[0] - m.from[0], m.to[1] - m.from[1]);
        let len2 = dx * dx + dy * dy;
        for y in 0..cfg.height {
            for x in 0..cfg.width {
                let (px, py) = (x as f64 - m.from[0], y as f64 - m.from[1]);
                let u = if len2 > 0.0 {
                    ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                if (px - u * dx).hypot(py - u * dy) <= m.width_px / 2.0 {
                    data[y * cfg.width + x] = m.level;
                }
            }
        }
    }
    data
}

fn envelope_pixels(
    b: &RotatedBox,
    pad: f64,
    w: usize,
    h: usize,
) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let (ew, eh) = b.envelope();
    let clip = |lo: f64, hi: f64, n: usize| {
        (lo.floor().max(0.0) as usize)..((hi.ceil() + 1.0).max(0.0) as usize).min(n)
    };
    (
        clip(b.cx - ew / 2.0 - pad, b.cx + ew / 2.0 + pad, w),
        clip(b.cy - eh / 2.0 - pad, b.cy + eh / 2.0 + pad, h),
    )
}

fn paint(
    gray: &mut [u8],
    rgb: &mut [[u8; 3]],
    width: usize,
    height: usize,
    body: &Template,
    b: &RotatedBox,
    color: [u8; 3],
) {
    let scale = body.width() as f64 / b.w;
    let (s, c) = b.theta.sin_cos();
    let (tcx, tcy) = (
        (body.width() as f64 - 1.0) / 2.0,
        (body.height() as f64 - 1.0) / 2.0,
    );
    let (tw, th) = (body.width() as f64, body.height() as f64);
    let l = luma(color).max(1) as f64;
    let (xs, ys) = envelope_pixels(b, 1.0, width, height);
    for y in ys {
        for x in xs.clone() {
            let (dx, dy) = (x as f64 - b.cx, y as f64 - b.cy);
            let sx = (c * dx + s * dy) * scale + tcx;
            let sy = (-s * dx + c * dy) * scale + tcy;
            if sx < -0.5 || sy < -0.5 || sx > tw - 0.5 || sy > th - 0.5 {
                continue;
            }
            let v = body
                .sample(sx.clamp(0.0, tw - 1.0), sy.clamp(0.0, th - 1.0))
                .expect("clamped inside");
            let i = y * width + x;
            gray[i] = v.round().clamp(0.0, 255.0) as u8;
            rgb[i] = color.map(|ch| (ch as f64 * v / l).round().clamp(0.0, 255.0) as u8);
        }
    }
}

/// Renders the scenario. Frames are independent and drawn in parallel; each
/// frame's noise comes from its own stream of the seeded generator.
pub fn generate(cfg: &ScenarioConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let to_pixel = cfg
        .homography
        .inverse()
        .map_err(|e| SynthError::InvalidScenario(format!("homography: {e}")))?;
    let mut vehicles: Vec<&VehicleSpec> = cfg.vehicles.iter().collect();
    vehicles.sort_by_key(|v| v.id);
    let tracks: Vec<(&VehicleSpec, Vec<Pose>)> = vehicles
        .iter()
        .map(|v| Ok((*v, poses(v, cfg, &to_pixel)?)))
        .collect::<Result<_, SynthError>>()?;

    let base = background(cfg);
    let bodies: Vec<Template> = tracks.iter().map(|(v, _)| body_template(v.class)).collect();
    let (w, h) = (cfg.width, cfg.height);
    let rendered: Vec<(Vec<u8>, Vec<[u8; 3]>)> = (0..cfg.frames)
        .into_par_iter()
        .map(|f| {
            let mut gray = base.clone();
            let mut rgb: Vec<[u8; 3]> = base.iter().map(|&g| [g; 3]).collect();
            let present = tracks.iter().zip(&bodies).filter_map(|((v, ps), body)| {
                let k = f.checked_sub(v.spawn_frame)? as usize;
                ps.get(k).map(|p| (v, p, body))
            });
            let mut occluders = Vec::new();
            for (v, p, body) in present {
                paint(
                    &mut gray,
                    &mut rgb,
                    w,
                    h,
                    body,
                    &p.bbox,
                    v.color.unwrap_or_else(|| default_color(v.class)),
                );
                if p.occluded {
                    occluders.push(p.bbox);
                }
            }
            for b in occluders {
                let (xs, ys) = envelope_pixels(&b, 2.0, w, h);
                for y in ys {
                    for x in xs.clone() {
                        gray[y * w + x] = cfg.background.level;
                        rgb[y * w + x] = [cfg.background.level; 3];
                    }
                }
            }
            if cfg.noise > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(f + 1);
                let n = cfg.noise as i16;
                for (g, c) in gray.iter_mut().zip(rgb.iter_mut()) {
                    let d = rng.gen_range(-n..=n);
                    *g = (*g as i16 + d).clamp(0, 255) as u8;
                    *c = c.map(|ch| (ch as i16 + d).clamp(0, 255) as u8);
                }
            }
            (gray, rgb)
        })
        .collect();

    let mut frames = Vec::with_capacity(rendered.len());
    let mut color = Vec::with_capacity(rendered.len());
    for (f, (gray, rgb)) in rendered.into_iter().enumerate() {
        frames.push(Frame::new(w, h, gray)?.with_timing(f as u64, cfg.fps)?);
        color.push(RgbFrame::new(w, h, rgb)?);
    }

    let world_layout = cfg
        .layout
        .to_world(&cfg.homography)
        .map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
    let mut boxes: Vec<GtBox> = tracks
        .iter()
        .flat_map(|(v, ps)| {
            ps.iter().map(|p| GtBox {
                frame_index: p.frame,
                track_id: v.id,
                class: v.class,
                bbox: p.bbox,
                occluded: p.occluded,
            })
        })
        .collect();
    boxes.sort_by_key(|b| (b.frame_index, b.track_id));
    let trajectories: Vec<GtTrajectory> = tracks
        .iter()
        .filter(|(_, ps)| !ps.is_empty())
        .map(|(v, ps)| GtTrajectory {
            track_id: v.id,
            class: v.class,
            frames: ps.iter().map(|p| p.frame).collect(),
            world: ps.iter().map(|p| p.world).collect(),
            pixel: ps.iter().map(|p| p.bbox.center()).collect(),
            speed_kmh: ps.iter().map(|p| p.speed_kmh).collect(),
        })
        .collect();
    let mut gate_log: Vec<_> = trajectories
        .iter()
        .flat_map(|t| {
            let path = TrackPath {
                track_id: t.track_id,
                class: t.class,
                points: t
                    .frames
                    .iter()
                    .copied()
                    .zip(t.world.iter().copied())
                    .collect(),
            };
            crossings(&path, &world_layout.gates)
        })
        .collect();
    gate_log.sort_by_key(|c| (c.frame_index, c.track_id, c.gate));
    let violations = scripted_violations(&trajectories, &world_layout, &cfg.violation, cfg.fps);

    Ok(SynthOutput {
        frames,
        color: cfg.color.then_some(color),
        truth: GroundTruth {
            width: w,
            height: h,
            fps: cfg.fps,
            frames: cfg.frames,
            homography: cfg.homography,
            boxes,
            trajectories,
            violations,
            crossings: gate_log,
        },
    })
}
