//! LiDAR / rig extrinsic calibration from planar-target observations:
//! RANSAC plane segmentation, decoupled rotation (Wahba) and translation
//! (linear system) estimation, and point-to-plane refinement.

use nalgebra::{DMatrix, Matrix3, Rotation3, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{Plane3, RigidPose};

use super::{CalibError, CalibResult};

/// One paired target observation: the board plane in the rig body frame
/// (from camera-side target pose estimation) and the LiDAR points that
/// landed on the board.
#[derive(Debug, Clone)]
pub struct PlaneObservation {
    pub plane_cam: Plane3,
    pub lidar_points: Vec<Vector3<f64>>,
}

/// RANSAC plane segmentation followed by a total-least-squares refit of the
/// inlier set. The returned normal points toward the sensor origin.
pub fn segment_plane(
    points: &[Vector3<f64>],
    dist_threshold_m: f64,
    seed: u64,
) -> CalibResult<(Plane3, Vec<usize>)> {
    assert!(points.len() >= 3, "need at least 3 points");
    if points.len() == 3 {
        let plane = Plane3::from_points(&points[0], &points[1], &points[2])
            .ok_or(CalibError::NoPlaneFound)?;
        return Ok((orient_to_origin(plane), vec![0, 1, 2]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_inliers: Vec<usize> = Vec::new();
    for _ in 0..200 {
        let mut idx = [0usize; 3];
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..points.len());
        }
        if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
            continue;
        }
        let Some(plane) = Plane3::from_points(&points[idx[0]], &points[idx[1]], &points[idx[2]])
        else {
            continue;
        };
        let inliers: Vec<usize> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| plane.signed_distance(p).abs() < dist_threshold_m)
            .map(|(i, _)| i)
            .collect();
        if inliers.len() > best_inliers.len() {
            best_inliers = inliers;
        }
    }
    if (best_inliers.len() as f64) < 0.2 * points.len() as f64 || best_inliers.len() < 3 {
        return Err(CalibError::NoPlaneFound);
    }
    // TLS refit on inliers, then one re-collection pass.
    let plane = fit_plane_tls(points, &best_inliers).ok_or(CalibError::NoPlaneFound)?;
    let inliers: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() < dist_threshold_m)
        .map(|(i, _)| i)
        .collect();
    let plane = fit_plane_tls(points, &inliers).ok_or(CalibError::NoPlaneFound)?;
    Ok((orient_to_origin(plane), inliers))
}

fn orient_to_origin(plane: Plane3) -> Plane3 {
    plane.oriented_toward(&Vector3::zeros())
}

fn fit_plane_tls(points: &[Vector3<f64>], indices: &[usize]) -> Option<Plane3> {
    if indices.len() < 3 {
        return None;
    }
    let n = indices.len() as f64;
    let centroid = indices
        .iter()
        .fold(Vector3::zeros(), |a, &i| a + points[i])
        / n;
    let mut cov = Matrix3::<f64>::zeros();
    for &i in indices {
        let d = points[i] - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut min_idx = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let normal = eig.eigenvectors.column(min_idx).into_owned();
    if normal.norm() < 1e-12 {
        return None;
    }
    Some(Plane3::new(normal, normal.dot(&centroid)))
}

/// Wahba/Kabsch rotation from paired unit normals: `n_cam = R * n_lidar`.
/// Always returns a proper rotation (det = +1).
pub fn lidar_rig_rotation(
    pairs: &[(Vector3<f64>, Vector3<f64>)],
) -> CalibResult<UnitQuaternion<f64>> {
    if pairs.len() < 2 {
        return Err(CalibError::DegenerateNormals);
    }
    // Need two non-parallel camera-side normals.
    let mut spread = 0.0f64;
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            spread = spread.max(pairs[i].0.cross(&pairs[j].0).norm());
        }
    }
    if spread < 1e-3 {
        return Err(CalibError::DegenerateNormals);
    }
    let mut b = Matrix3::<f64>::zeros();
    for (n_cam, n_lidar) in pairs {
        b += n_cam * n_lidar.transpose();
    }
    let svd = b.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let det = (u * v_t).determinant();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
    let r = u * d * v_t;
    Ok(UnitQuaternion::from_rotation_matrix(
        &Rotation3::from_matrix_unchecked(r),
    ))
}

/// Linear translation solve: stack `n_camᵀ t = d_cam - mean_p(n_camᵀ R p)`
/// over the observations.
pub fn lidar_rig_translation(
    rotation: &UnitQuaternion<f64>,
    observations: &[PlaneObservation],
) -> CalibResult<Vector3<f64>> {
    let n = observations.len();
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    for (i, obs) in observations.iter().enumerate() {
        let normal = obs.plane_cam.normal();
        for j in 0..3 {
            a[(i, j)] = normal[j];
        }
        let mean_proj = obs
            .lidar_points
            .iter()
            .map(|p| normal.dot(&(rotation * p)))
            .sum::<f64>()
            / obs.lidar_points.len().max(1) as f64;
        b[i] = obs.plane_cam.distance() - mean_proj;
    }
    let svd = a.svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::MAX, f64::min);
    if !smin.is_finite() || smin < 1e-3 {
        return Err(CalibError::RankDeficientNormals);
    }
    let t = svd
        .solve(&b, 1e-12)
        .map_err(|_| CalibError::RankDeficientNormals)?;
    Ok(Vector3::new(t[0], t[1], t[2]))
}

/// Point-to-plane refinement of the LiDAR -> rig transform:
/// minimizes `sum_i sum_p (n_i . (R p + t) - d_i)^2` with Gauss-Newton/LM.
pub fn lidar_rig_refine(
    initial: &RigidPose,
    observations: &[PlaneObservation],
) -> CalibResult<RigidPose> {
    if observations.len() < 3 {
        return Err(CalibError::RankDeficientNormals);
    }
    let cost_of = |pose: &RigidPose| -> f64 {
        let mut c = 0.0;
        for obs in observations {
            let n = obs.plane_cam.normal();
            let d = obs.plane_cam.distance();
            for p in &obs.lidar_points {
                let e = n.dot(&pose.transform_point(p)) - d;
                c += e * e;
            }
        }
        c
    };

    let mut pose = *initial;
    let mut cost = cost_of(&pose);
    let mut lambda = 1e-3;
    for _ in 0..50 {
        let mut h = nalgebra::Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for obs in observations {
            let n = obs.plane_cam.normal();
            let d = obs.plane_cam.distance();
            for p in &obs.lidar_points {
                let e = n.dot(&pose.transform_point(p)) - d;
                let j_point = pose.boxplus_point_jacobian(p);
                let j = j_point.transpose() * n; // 6x1
                h += j * j.transpose();
                g += j * e;
            }
        }
        if g.norm() < 1e-12 {
            break;
        }
        let mut stepped = false;
        for _ in 0..10 {
            let mut hd = h;
            for i in 0..6 {
                hd[(i, i)] += lambda * h[(i, i)].max(1e-12);
            }
            let Some(chol) = hd.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let dx = chol.solve(&(-g));
            let cand = pose.boxplus(&dx);
            let cand_cost = cost_of(&cand);
            if cand_cost < cost {
                pose = cand;
                cost = cand_cost;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    Ok(pose)
}
