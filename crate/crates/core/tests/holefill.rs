use morphcloud::holefill::{fill_holes, HoleFillConfig, Homography};
use morphcloud::synthetic::Ellipsoid;
use morphcloud::{project, CanonicalView, ColoredPointCloud};

const HEMISPHERE: Ellipsoid = Ellipsoid::new(1.0, 1.0, 1.0, 7);

/// Hemisphere with the points behind a disc of about 200 pixels removed.
fn holed_hemisphere(view: &CanonicalView) -> (ColoredPointCloud, Vec<(usize, usize)>) {
    let full = HEMISPHERE.grid_cloud(view);
    let (hx, hy) = view.to_pixel(&[0.3, 0.2, 0.0]);
    let in_hole = |p: &[f64; 3]| {
        let (px, py) = view.to_pixel(p);
        (px.round() - hx.round()).powi(2) + (py.round() - hy.round()).powi(2) <= 64.0
    };
    let cloud = full.filter(|p, _| !in_hole(p));
    let holes: Vec<(usize, usize)> = full
        .vertices()
        .iter()
        .filter(|p| in_hole(p))
        .map(|p| {
            let (px, py) = view.to_pixel(p);
            (px.round() as usize, py.round() as usize)
        })
        .collect();
    (cloud, holes)
}

#[test]
fn planted_hole_is_filled_close_to_the_surface() {
    let view = CanonicalView::default();
    let (cloud, holes) = holed_hemisphere(&view);
    assert!((195..=210).contains(&holes.len()), "{}", holes.len());
    let out = fill_holes(&cloud, &view, &HoleFillConfig::default()).unwrap();
    for r in &out.reports {
        assert!(r.dropped.is_none(), "{r:?}");
    }
    let mut filled = 0;
    for &(x, y) in &holes {
        if !*out.maps.valid.get(x, y) {
            continue;
        }
        let (wx, wy) = view.to_world(x as f64, y as f64);
        let z = HEMISPHERE.height(wx, wy).unwrap();
        let d = *out.maps.depth.get(x, y);
        if (d - z).abs() <= 0.05 * z {
            filled += 1;
        }
    }
    assert!(filled as f64 >= 0.9 * holes.len() as f64, "{filled} of {}", holes.len());
}

#[test]
fn zero_offset_registers_to_identity() {
    let view = CanonicalView::default();
    let (cloud, _) = holed_hemisphere(&view);
    let config = HoleFillConfig {
        offsets: Some(vec![[0.0, 0.0, 0.0]]),
        ..HoleFillConfig::default()
    };
    let out = fill_holes(&cloud, &view, &config).unwrap();
    let h = out.reports[0].homography.expect("registered");
    assert!(h.distance(&Homography::identity()) < 1e-2, "{:?}", h);
    // Canonical and its registered copy agree, so the average is the
    // inpainted canonical rendering.
    assert_eq!(out.maps.color, out.canonical.inpainted.color);
}

#[test]
fn hole_free_input_is_nearly_unchanged() {
    let view = CanonicalView::default();
    let cloud = HEMISPHERE.grid_cloud(&view);
    let before = project(&cloud, &view).unwrap();
    let out = fill_holes(&cloud, &view, &HoleFillConfig::default()).unwrap();
    let (mut total, mut n) = (0.0, 0usize);
    for i in 0..before.valid.data().len() {
        if before.valid.data()[i] && out.maps.valid.data()[i] {
            let (a, b) = (before.color.data()[i], out.maps.color.data()[i]);
            let ga = 0.299 * a[0] as f64 + 0.587 * a[1] as f64 + 0.114 * a[2] as f64;
            let gb = 0.299 * b[0] as f64 + 0.587 * b[1] as f64 + 0.114 * b[2] as f64;
            total += (ga - gb).abs();
            n += 1;
        }
    }
    let mean = total / n as f64;
    assert!(mean < 2.0, "mean gray deviation {mean}");
}

#[test]
fn fill_is_reproducible() {
    let view = CanonicalView {
        width: 200,
        height: 200,
        scale: 80.0,
        cx: 100.0,
        cy: 100.0,
        ..CanonicalView::default()
    };
    let (cloud, _) = holed_hemisphere(&view);
    let a = fill_holes(&cloud, &view, &HoleFillConfig::default()).unwrap();
    let b = fill_holes(&cloud, &view, &HoleFillConfig::default()).unwrap();
    assert_eq!(a.cloud, b.cloud);
    let c = morphcloud::par::with_execution(morphcloud::par::Execution::Sequential, || {
        fill_holes(&cloud, &view, &HoleFillConfig::default()).unwrap()
    });
    assert_eq!(a.cloud, c.cloud);
}
