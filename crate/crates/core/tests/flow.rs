use flareforge::flowio::{estimate_flow_pyramidal, FlowField, LkParams};
use flareforge::image::Plane;
use flareforge::par::Exec;

fn texture(x: f64, y: f64) -> f64 {
    0.5 + 0.2 * (0.31 * x).sin() * (0.23 * y).cos() + 0.15 * (0.11 * (x + 2.0 * y)).sin()
        + 0.1 * (0.07 * x - 0.19 * y).cos()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

#[test]
fn lk_recovers_a_horizontal_shift() {
    let (w, h) = (96, 72);
    let a = Plane::from_fn(w, h, |x, y| texture(x as f64, y as f64));
    let b = Plane::from_fn(w, h, |x, y| texture(x as f64 - 3.0, y as f64));
    let flow = estimate_flow_pyramidal(&a, &b, &LkParams::default(), Exec::Parallel).unwrap();
    let inner = |f: &dyn Fn(f32, f32) -> f64| -> Vec<f64> {
        let mut out = Vec::new();
        for y in 8..h - 8 {
            for x in 8..w - 8 {
                let (u, v) = flow.get(x, y);
                out.push(f(u, v));
            }
        }
        out
    };
    let mu = median(inner(&|u, _| u as f64));
    let mv = median(inner(&|_, v| v as f64));
    assert!((2.5..=3.5).contains(&mu), "median u {mu}");
    assert!(mv.abs() < 0.5, "median v {mv}");
}

#[test]
fn lk_is_equivariant_under_horizontal_flips() {
    let (w, h) = (96, 72);
    let f = |x: f64, y: f64| texture(x, y) + 0.05 * (0.5 * y).sin();
    let a = Plane::from_fn(w, h, |x, y| f(x as f64, y as f64));
    let b = Plane::from_fn(w, h, |x, y| f(x as f64 - 2.0, y as f64 + 1.0));
    let flip = |p: &Plane| Plane::from_fn(w, h, |x, y| p.get(w - 1 - x, y));
    let params = LkParams::default();
    let fwd = estimate_flow_pyramidal(&a, &b, &params, Exec::Sequential).unwrap();
    let mirrored = estimate_flow_pyramidal(&flip(&a), &flip(&b), &params, Exec::Sequential).unwrap();
    let mut diffs = Vec::new();
    for y in 8..h - 8 {
        for x in 8..w - 8 {
            let u = fwd.get(x, y).0;
            let um = mirrored.get(w - 1 - x, y).0;
            diffs.push(((u + um) as f64).abs());
        }
    }
    let m = median(diffs);
    assert!(m < 0.2, "median mismatch {m}");
}

#[test]
fn flo_files_round_trip_and_chain() {
    let dir = tempfile::tempdir().unwrap();
    let f = FlowField::from_fn(20, 10, |x, y| (x as f32 * 0.25 - 1.0, y as f32 * -0.5));
    let path = dir.path().join("a.flo");
    f.save(&path).unwrap();
    assert_eq!(FlowField::load(&path).unwrap(), f);

    let steps = vec![FlowField::constant(20, 10, 1.5, -0.5); 4];
    let chained = FlowField::chain(&steps, Exec::Parallel).unwrap();
    for &[u, v] in chained.data() {
        assert_eq!((u, v), (6.0, -2.0));
    }
    let half = chained.resized(10, 5, Exec::Parallel).unwrap();
    assert_eq!(half.get(3, 2), (3.0, -1.0));
}

#[test]
fn truncated_flo_is_a_format_error() {
    let bytes = FlowField::constant(4, 4, 1.0, 1.0).write_flo();
    let err = FlowField::read_flo(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(matches!(err, flareforge::Error::Format { .. }), "{err}");
}
