use mpiforge_core::adaptive::{allocate, interval_weights, prune_depths, redistribute_depths};
use mpiforge_core::codec::{decode_mpi, encode_mpi, Quantization};
use mpiforge_core::compact::{occupancy, threshold_alpha};
use mpiforge_core::cues::{build_psv, compute_cues, visibility_volume, Psv};
use mpiforge_core::geometry::{inverse_depth_samples, plane_homography, warp_image, Camera, DepthList, Homography};
use mpiforge_core::image::Image;
use mpiforge_core::math::{logit_clamped, sigmoid, LOGIT_EPS};
use mpiforge_core::mpi::{render_view, Mpi};
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn camera(rng: &mut ChaCha8Rng, w: usize, h: usize, offset: f64) -> Camera {
    let f = 1.5 * w.max(h) as f64;
    let k = Matrix3::new(
        f,
        0.0,
        (w as f64 - 1.0) / 2.0,
        0.0,
        f,
        (h as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    );
    let r = Rotation3::from_euler_angles(
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.05..0.05),
    );
    let c = Vector3::new(
        rng.random_range(-offset..offset),
        rng.random_range(-offset..offset),
        0.0,
    );
    Camera::with_center(k, *r.matrix(), c, w, h).unwrap()
}

fn mpi(rng: &mut ChaCha8Rng, d: usize, w: usize, h: usize, mask_rate: f64) -> Mpi {
    let reference = camera(rng, w, h, 0.2);
    let values = (0..d * w * h * 4).map(|_| rng.random_range(0.0..=1.0)).collect();
    let mask = (0..d * w * h).map(|_| rng.random_bool(mask_rate)).collect();
    let depths = inverse_depth_samples(2.0, 20.0, d).unwrap();
    Mpi::from_values(values, mask, depths, reference).unwrap()
}

fn image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Image {
    Image::from_fn(w, h, c, |_, _, _| rng.random_range(0.0..1.0))
}

fn bilinear(img: &Image, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (x, y) = (x.clamp(0.0, w - 1.0), y.clamp(0.0, h - 1.0));
    let (x0, y0) = (x.floor(), y.floor());
    let (x1, y1) = ((x0 + 1.0).min(w - 1.0), (y0 + 1.0).min(h - 1.0));
    let (fx, fy) = (x - x0, y - y0);
    let at = |a: f64, b: f64| img.get(a as usize, b as usize, c);
    (1.0 - fx) * (1.0 - fy) * at(x0, y0)
        + fx * (1.0 - fy) * at(x1, y0)
        + (1.0 - fx) * fy * at(x0, y1)
        + fx * fy * at(x1, y1)
}

fn homogeneous(m: &Matrix3<f64>, x: f64, y: f64) -> (f64, f64) {
    let p = m * Vector3::new(x, y, 1.0);
    (p.x / p.z, p.y / p.z)
}

struct Cues {
    visibility: Vec<f64>,
    mean: Vec<f64>,
    variance: Vec<f64>,
}

// Scalar re-derivation of the visibility-weighted cues: every warped plane
// and every transmittance product is formed voxel by voxel.
#[allow(clippy::needless_range_loop)]
fn cue_oracle(psvs: &[Psv], m: &Mpi, cameras: &[Camera]) -> Cues {
    let (d_count, w, h) = (m.depth_count(), m.width(), m.height());
    let k = cameras.len();
    let mut vis = vec![vec![0.0; d_count * w * h]; k];
    for (view_index, view) in cameras.iter().enumerate() {
        let warped: Vec<Image> = (0..d_count)
            .map(|j| {
                let to_ref = plane_homography(m.reference(), view, m.depths()[j])
                    .unwrap()
                    .matrix()
                    .try_inverse()
                    .unwrap();
                let alpha = m.alpha_plane(j);
                Image::from_fn(view.width(), view.height(), 1, |x, y, _| {
                    let (u, v) = homogeneous(&to_ref, x as f64, y as f64);
                    bilinear(&alpha, u, v, 0)
                })
            })
            .collect();
        for d in 0..d_count {
            let to_view = *plane_homography(m.reference(), view, m.depths()[d]).unwrap().matrix();
            for y in 0..h {
                for x in 0..w {
                    let (u, v) = homogeneous(&to_view, x as f64, y as f64);
                    let mut t = 1.0;
                    for plane in &warped[d + 1..] {
                        t *= 1.0 - bilinear(plane, u, v, 0);
                    }
                    vis[view_index][(d * h + y) * w + x] = t;
                }
            }
        }
    }
    let voxels = d_count * w * h;
    let mut out = Cues {
        visibility: vec![0.0; voxels],
        mean: vec![0.0; voxels * 3],
        variance: vec![0.0; voxels],
    };
    for voxel in 0..voxels {
        let (d, p) = (voxel / (w * h), voxel % (w * h));
        let total: f64 = (0..k).map(|i| vis[i][voxel]).sum();
        let weight = |i: usize| if total < 1e-4 { 1.0 } else { vis[i][voxel] };
        let norm = if total < 1e-4 { k as f64 } else { total };
        let color = |i: usize, c: usize| psvs[i].plane(d).data()[p * 3 + c];
        for c in 0..3 {
            out.mean[voxel * 3 + c] = (0..k).map(|i| weight(i) * color(i, c)).sum::<f64>() / norm;
        }
        let mut var = 0.0;
        for i in 0..k {
            for c in 0..3 {
                var += weight(i) * (color(i, c) - out.mean[voxel * 3 + c]).powi(2);
            }
        }
        out.visibility[voxel] = total;
        out.variance[voxel] = var / (3.0 * norm);
    }
    out
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_depths_are_evenly_spaced(near in 0.1f64..10.0, ratio in 1.01f64..100.0, count in 2usize..64) {
        let far = near * ratio;
        let depths = inverse_depth_samples(near, far, count).unwrap();
        let s = depths.as_slice();
        prop_assert_eq!(s.len(), count);
        prop_assert!((s[0] - far).abs() <= 1e-9 * far);
        prop_assert!((s[count - 1] - near).abs() <= 1e-9 * near);
        let step = 1.0 / s[1] - 1.0 / s[0];
        for pair in s.windows(2) {
            prop_assert!(pair[0] > pair[1]);
            prop_assert!(((1.0 / pair[1] - 1.0 / pair[0]) - step).abs() <= 1e-9 * (1.0 / near));
        }
    }

    #[test]
    fn plane_homography_agrees_with_projection(seed in any::<u64>(), depth in 1.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = camera(&mut rng, 32, 24, 1.0);
        let b = camera(&mut rng, 32, 24, 1.0);
        let same = plane_homography(&a, &a, depth).unwrap();
        let m = same.matrix() / same.matrix()[(2, 2)];
        prop_assert!((m - Matrix3::identity()).norm() <= 1e-12);
        let h = plane_homography(&a, &b, depth).unwrap();
        for _ in 0..8 {
            let (x, y) = (rng.random_range(0.0..32.0), rng.random_range(0.0..24.0));
            let (u, v) = b.project(&a.unproject(x, y, depth)).unwrap();
            let (hu, hv) = h.apply(x, y);
            prop_assert!((hu - u).abs() < 1e-7 && (hv - v).abs() < 1e-7);
        }
    }

    #[test]
    fn warp_matches_naive_sampling(seed in any::<u64>(), w in 1usize..12, h in 1usize..12, c in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = image(&mut rng, w, h, c);
        let mut m = Matrix3::identity();
        for v in m.iter_mut().take(8) {
            *v += rng.random_range(-0.05..0.05);
        }
        m[(0, 2)] += rng.random_range(-3.0..3.0);
        m[(1, 2)] += rng.random_range(-3.0..3.0);
        let hom = Homography::new(m).unwrap();
        let (ow, oh) = (rng.random_range(1..12), rng.random_range(1..12));
        let out = warp_image(&src, &hom, ow, oh).unwrap();
        let inv = m.try_inverse().unwrap();
        for y in 0..oh {
            for x in 0..ow {
                let (sx, sy) = homogeneous(&inv, x as f64, y as f64);
                for ch in 0..c {
                    prop_assert!((out.get(x, y, ch) - bilinear(&src, sx, sy, ch)).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn cues_match_scalar_oracle_and_ignore_view_order(seed in any::<u64>(), k in 2usize..5, d in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(2..6), rng.random_range(2..6));
        let m = mpi(&mut rng, d, w, h, 0.1);
        let cameras: Vec<Camera> = (0..k).map(|_| camera(&mut rng, w, h, 0.3)).collect();
        let psvs: Vec<Psv> = cameras
            .iter()
            .map(|cam| build_psv(&image(&mut rng, w, h, 3), cam, m.reference(), m.depths()).unwrap())
            .collect();
        let cues = compute_cues(&psvs, &m, &cameras).unwrap();
        let oracle = cue_oracle(&psvs, &m, &cameras);
        prop_assert!(close(cues.total_visibility(), &oracle.visibility, 1e-9));
        prop_assert!(close(cues.mean_color(), &oracle.mean, 1e-9));
        prop_assert!(close(cues.color_variance(), &oracle.variance, 1e-9));

        let mut order: Vec<usize> = (0..k).collect();
        order.rotate_left(1);
        order.swap(0, k - 1);
        let cams2: Vec<Camera> = order.iter().map(|&i| cameras[i].clone()).collect();
        let psvs2: Vec<Psv> = order.iter().map(|&i| psvs[i].clone()).collect();
        let permuted = compute_cues(&psvs2, &m, &cams2).unwrap();
        prop_assert!(close(cues.total_visibility(), permuted.total_visibility(), 1e-12));
        prop_assert!(close(cues.mean_color(), permuted.mean_color(), 1e-12));
        prop_assert!(close(cues.color_variance(), permuted.color_variance(), 1e-12));
        prop_assert!(cues.total_visibility().iter().all(|&v| (0.0..=k as f64 + 1e-12).contains(&v)));
    }

    #[test]
    fn reference_visibility_grows_toward_the_viewer(seed in any::<u64>(), d in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mpi(&mut rng, d, 4, 3, 0.2);
        let vis = visibility_volume(&m, m.reference()).unwrap();
        prop_assert!(vis[d - 1].data().iter().all(|&v| (v - 1.0).abs() <= 1e-12));
        for z in 0..d - 1 {
            for p in 0..12 {
                let expected = vis[z + 1].data()[p] * (1.0 - m.alpha(z + 1, p % 4, p / 4));
                prop_assert!(vis[z].data()[p] <= vis[z + 1].data()[p] + 1e-12);
                prop_assert!((vis[z].data()[p] - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn thresholding_is_monotone_and_idempotent(seed in any::<u64>(), t1 in 0.0f64..0.95, t2 in 0.0f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mpi(&mut rng, 4, 5, 4, 0.2);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = threshold_alpha(&m, lo).unwrap();
        let b = threshold_alpha(&m, hi).unwrap();
        prop_assert!(occupancy(&b) <= occupancy(&a));
        prop_assert!(occupancy(&a) <= occupancy(&m));
        let again = threshold_alpha(&b, hi).unwrap();
        prop_assert_eq!(again.values(), b.values());
        prop_assert_eq!(again.zero_mask(), b.zero_mask());
        // a lower threshold after a higher one changes nothing
        let relaxed = threshold_alpha(&b, lo).unwrap();
        prop_assert_eq!(relaxed.values(), b.values());
        for ((v, src), &masked) in b.values().chunks(4).zip(m.values().chunks(4)).zip(b.zero_mask()) {
            prop_assert!(masked || v[3] >= hi);
            prop_assert!(!masked || v[3] == 0.0);
            // only α changes; color under a zeroed α is kept
            prop_assert_eq!(&v[..3], &src[..3]);
            prop_assert!(masked || v[3] == src[3]);
        }
        // the codec stores nothing under the mask: those voxels come back black
        let stored = decode_mpi(&encode_mpi(&b, Quantization::F32)).unwrap();
        prop_assert_eq!(stored.zero_mask(), b.zero_mask());
        for (v, &masked) in stored.values().chunks(4).zip(b.zero_mask()) {
            prop_assert!(!masked || v.iter().all(|&x| x == 0.0));
        }
        // masked voxels contribute nothing to a render
        let rendered = render_view(&b, b.reference()).unwrap();
        prop_assert!(rendered.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn allocation_respects_quotas(weights in proptest::collection::vec(0.0f64..1.0, 1..10), count in 0usize..40) {
        let alloc = allocate(&weights, count);
        prop_assert_eq!(alloc.len(), weights.len());
        prop_assert_eq!(alloc.iter().sum::<usize>(), count);
        let total: f64 = weights.iter().sum();
        for (&a, &w) in alloc.iter().zip(&weights) {
            let q = if total > 0.0 { count as f64 * w / total } else { count as f64 / weights.len() as f64 };
            prop_assert!(a as f64 >= q.floor() && a as f64 <= q.floor() + 1.0);
        }
        prop_assert_eq!(allocate(&weights, count), alloc);
    }

    #[test]
    fn adapted_depths_keep_the_plane_count(seed in any::<u64>(), d in 2usize..10, floor in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mpi(&mut rng, d, 3, 3, 0.0);
        let (kept, removed) = prune_depths(&m, floor);
        prop_assert!(kept.len() >= 2);
        prop_assert_eq!(kept.len() + removed, d);
        prop_assert!(kept.iter().all(|k| m.depths().as_slice().contains(k)));
        let weights = interval_weights(&m, &kept).unwrap();
        let out = redistribute_depths(&weights, removed).unwrap();
        prop_assert_eq!(out.len(), d);
        prop_assert!(out.as_slice().windows(2).all(|p| p[0] > p[1]));
        prop_assert_eq!(out.as_slice()[0], kept.as_slice()[0]);
        prop_assert_eq!(out.as_slice()[d - 1], kept.as_slice()[kept.len() - 1]);
    }

    #[test]
    fn codec_round_trips(seed in any::<u64>(), d in 2usize..6, w in 1usize..7, h in 1usize..7, mask_rate in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mpi(&mut rng, d, w, h, mask_rate);
        let exact = decode_mpi(&encode_mpi(&m, Quantization::F32)).unwrap();
        prop_assert_eq!(exact.zero_mask(), m.zero_mask());
        for (a, b) in exact.values().iter().zip(m.values()) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
        let coarse = decode_mpi(&encode_mpi(&m, Quantization::U8)).unwrap();
        prop_assert!(close(coarse.values(), m.values(), 1.0 / 510.0 + 1e-12));
        prop_assert!(close(exact.depths().as_slice(), m.depths().as_slice(), 1e-5 * 20.0));
    }

    #[test]
    fn logit_round_trip_within_clamp(p in 0.0f64..=1.0) {
        let back = sigmoid(logit_clamped(p, LOGIT_EPS));
        prop_assert!((back - p.clamp(LOGIT_EPS, 1.0 - LOGIT_EPS)).abs() <= 1e-12);
    }
}

#[test]
fn depth_list_rejects_unordered_input() {
    assert!(DepthList::new(vec![1.0, 2.0]).is_err());
    assert!(DepthList::new(vec![2.0, 2.0]).is_err());
    assert!(DepthList::new(vec![2.0, 1.0]).is_ok());
}
