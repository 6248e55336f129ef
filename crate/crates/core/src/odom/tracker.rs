//! Coarse-to-fine photometric alignment of the current frame against the
//! most recent keyframe over all cameras, with an optional gyro rotation
//! prior and optional affine brightness compensation.

use std::collections::HashMap;

use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3, Vector6};

use crate::geom::{CameraRig, RigidPose};
use crate::img::FloatImage;
use crate::solver::huber_weight;

use super::keyframe::Keyframe;
use super::{OdomConfig, OdomError, OdomResult};

/// Relative body rotation prior (keyframe body -> current body) with a
/// scalar information weight.
#[derive(Debug, Clone)]
pub struct GyroPrior {
    pub rotation: UnitQuaternion<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct TrackStats {
    pub inlier_fraction: f64,
    pub valid_points: usize,
    pub final_cost: f64,
    pub iterations: usize,
    /// Estimated (gain, offset) when affine brightness is enabled.
    pub affine: (f64, f64),
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Tracks the current images against `keyframe`, returning the transform
/// taking keyframe body coordinates into current body coordinates and the
/// tracking statistics. `init` seeds the iteration.
pub fn track_frame(
    rig: &CameraRig,
    config: &OdomConfig,
    keyframe: &Keyframe,
    images: &HashMap<usize, FloatImage>,
    init: &RigidPose,
    gyro: Option<&GyroPrior>,
) -> OdomResult<(RigidPose, TrackStats)> {
    if keyframe.points.len() < config.min_points {
        return Err(OdomError::InsufficientGradient {
            needed: config.min_points,
            got: keyframe.points.len(),
        });
    }
    // Current-frame pyramids for the cameras we use.
    let mut pyramids: HashMap<usize, Vec<FloatImage>> = HashMap::new();
    for (&cam_idx, image) in images {
        if config.cameras.contains(&cam_idx) {
            pyramids.insert(cam_idx, image.pyramid(config.pyramid_levels));
        }
    }

    // Cache per-camera transforms.
    let extrinsics: HashMap<usize, (RigidPose, RigidPose)> = config
        .cameras
        .iter()
        .map(|&c| (c, (rig.camera(c).extrinsic, rig.camera(c).extrinsic.inverse())))
        .collect();

    let mut t_ck = *init; // keyframe body -> current body
    let mut gain = 1.0f64;
    let mut offset = 0.0f64;
    let mut iterations = 0;
    let huber = f64::from(config.huber_intensity);

    for level in (0..config.pyramid_levels).rev() {
        let scale = 1.0 / f64::from(1u32 << level);
        // Per-level keyframe point intensities resampled from the keyframe
        // pyramid at the scaled pixel location.
        let mut level_points = Vec::with_capacity(keyframe.points.len());
        for p in &keyframe.points {
            let Some(kf_pyr) = keyframe.pyramids.get(&p.camera) else {
                continue;
            };
            let img = &kf_pyr[level as usize];
            let (u, v) = (p.pixel[0] * scale, p.pixel[1] * scale);
            let Some(intensity) = img.sample(u, v) else {
                continue;
            };
            level_points.push((p, f64::from(intensity)));
        }

        for _ in 0..30 {
            iterations += 1;
            let mut h = nalgebra::Matrix6::<f64>::zeros();
            let mut g = Vector6::<f64>::zeros();
            let mut h_affine = nalgebra::Matrix2::<f64>::zeros();
            let mut g_affine = Vector2::<f64>::zeros();
            let mut h_cross = nalgebra::Matrix6x2::<f64>::zeros();
            let mut cost = 0.0;
            let mut n_valid = 0usize;

            for (p, key_intensity) in &level_points {
                let Some(pyr) = pyramids.get(&p.camera) else { continue };
                let (ext, ext_inv) = &extrinsics[&p.camera];
                let x_keybody = ext_inv.transform_point(&(p.ray / p.inv_depth));
                let x_curbody = t_ck.transform_point(&x_keybody);
                let x_curcam = ext.transform_point(&x_curbody);
                let model = rig.camera(p.camera).model.scaled(level);
                let Ok((px, j_proj)) = model.project_with_jacobian(&x_curcam) else {
                    continue;
                };
                let img = &pyr[level as usize];
                let Some((value, gu, gv)) = img.sample_with_gradient(px[0], px[1]) else {
                    continue;
                };
                n_valid += 1;
                let predicted = gain * key_intensity + offset;
                let r = f64::from(value) - predicted;
                let w = huber_weight(r.abs(), huber);
                cost += w * r * r;

                // d residual / d twist (left-multiplicative on t_ck).
                let grad = nalgebra::Matrix1x2::new(f64::from(gu), f64::from(gv));
                let mut j_body = nalgebra::Matrix3x6::zeros();
                j_body.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
                j_body
                    .fixed_view_mut::<3, 3>(0, 3)
                    .copy_from(&(-skew(&x_curbody)));
                let j_pose = grad * j_proj * ext.rotation_matrix() * j_body; // 1x6
                let jt = j_pose.transpose();
                h += jt * j_pose * w;
                g += jt * r * w;

                if config.affine_brightness {
                    let j_aff = nalgebra::Matrix1x2::new(-key_intensity, -1.0);
                    h_affine += j_aff.transpose() * j_aff * w;
                    g_affine += j_aff.transpose() * r * w;
                    h_cross += jt * j_aff * w;
                }
            }

            if n_valid < config.min_points / 2 {
                return Err(OdomError::InsufficientGradient {
                    needed: config.min_points / 2,
                    got: n_valid,
                });
            }

            // Gyro prior on the rotation block.
            if let Some(prior) = gyro {
                let e = (prior.rotation.inverse() * t_ck.rotation())
                    .axis_angle()
                    .map(|(axis, angle)| axis.into_inner() * angle)
                    .unwrap_or_else(Vector3::zeros);
                let w = prior.weight;
                for i in 0..3 {
                    h[(3 + i, 3 + i)] += w;
                    g[3 + i] += w * e[i];
                }
                cost += w * e.norm_squared();
            }

            // Solve; eliminate the affine block first when enabled.
            let step = if config.affine_brightness {
                let Some(aff_inv) = (h_affine + nalgebra::Matrix2::identity() * 1e-9).try_inverse()
                else {
                    break;
                };
                let h_red = h - h_cross * aff_inv * h_cross.transpose();
                let g_red = g - h_cross * aff_inv * g_affine;
                let Some(chol) = (h_red + nalgebra::Matrix6::identity() * 1e-12).cholesky() else {
                    break;
                };
                let dx = chol.solve(&(-g_red));
                let da = aff_inv * (-g_affine - h_cross.transpose() * dx);
                gain += da[0];
                offset += da[1];
                dx
            } else {
                let Some(chol) = (h + nalgebra::Matrix6::identity() * 1e-12).cholesky() else {
                    break;
                };
                chol.solve(&(-g))
            };

            t_ck = RigidPose::se3_exp(&step).compose(&t_ck);
            let _ = cost;
            if step.norm() < 1e-10 {
                break;
            }
        }
    }

    // Final statistics at full resolution.
    let mut inliers = 0usize;
    let mut n_valid = 0usize;
    let mut cost = 0.0;
    for p in &keyframe.points {
        let Some(pyr) = pyramids.get(&p.camera) else { continue };
        let (ext, ext_inv) = &extrinsics[&p.camera];
        let x_keybody = ext_inv.transform_point(&(p.ray / p.inv_depth));
        let x_curcam = ext.transform_point(&t_ck.transform_point(&x_keybody));
        let Ok(px) = rig.camera(p.camera).model.project(&x_curcam) else {
            continue;
        };
        let Some(value) = pyr[0].sample(px[0], px[1]) else {
            continue;
        };
        n_valid += 1;
        let r = f64::from(value) - (gain * f64::from(p.intensity) + offset);
        cost += r * r;
        if r.abs() <= 2.0 * huber {
            inliers += 1;
        }
    }
    let inlier_fraction = if n_valid == 0 {
        0.0
    } else {
        inliers as f64 / keyframe.points.len() as f64
    };
    if inlier_fraction < 0.3 {
        return Err(OdomError::Diverged(inlier_fraction));
    }
    Ok((
        t_ck,
        TrackStats {
            inlier_fraction,
            valid_points: n_valid,
            final_cost: cost,
            iterations,
            affine: (gain, offset),
        },
    ))
}
