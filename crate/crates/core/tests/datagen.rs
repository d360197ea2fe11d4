use objex::datagen::{
    assemble_scene, gen_trajectory, load_excerpt, make_eval_set, max_acceleration, read_manifest, slow_motion_score,
    SceneSpec, TrajectorySpec, MARGIN,
};
use objex::dsp::{EXCERPT_LEN, N_FRAMES};
use objex::spatial::LayoutKind;

#[test]
fn generated_trajectories_respect_motion_limits() {
    let spec = TrajectorySpec::default();
    for seed in 0..1000 {
        let t = gen_trajectory(&spec, seed).unwrap();
        assert_eq!(t.len(), N_FRAMES);
        assert!(max_acceleration(&t) < spec.a_max, "seed {seed}");
        assert!(slow_motion_score(&t, spec.v_min) < 0.2, "seed {seed}");
        for p in &t.positions {
            assert!((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y));
        }
    }
}

#[test]
fn static_objects_stay_inside_the_margin() {
    for seed in 0..50 {
        let t = gen_trajectory(&TrajectorySpec::static_object(), seed).unwrap();
        let p0 = t.positions[0];
        assert!(t.positions.iter().all(|p| *p == p0));
        assert!((MARGIN..=1.0 - MARGIN).contains(&p0.x) && (MARGIN..=1.0 - MARGIN).contains(&p0.y));
    }
}

#[test]
fn scenes_are_pure_functions_of_the_spec() {
    let spec = SceneSpec { n_objects: 3, seed: 17, ..SceneSpec::default() };
    let a = assemble_scene(&spec).unwrap();
    let b = assemble_scene(&spec).unwrap();
    assert_eq!(a.sources, b.sources);
    assert_eq!(a.trajectories, b.trajectories);
    assert_eq!(a.bed, b.bed);
    let c = assemble_scene(&spec.with_seed(18)).unwrap();
    assert_ne!(a.sources, c.sources);
}

#[test]
fn eval_set_round_trips_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SceneSpec { n_objects: 2, ..SceneSpec::default() };
    let m = make_eval_set(tmp.path(), 2, &spec, 5, 1).unwrap();
    assert_eq!(read_manifest(tmp.path()).unwrap(), m);
    for entry in &m.excerpts {
        let ex = load_excerpt(&tmp.path().join(&entry.name)).unwrap();
        assert_eq!(ex.objects.len(), 2);
        assert_eq!(ex.mix51.len(), EXCERPT_LEN);
        let scene = assemble_scene(&spec.with_seed(entry.seed)).unwrap();
        // Trajectory files carry six decimals.
        for (a, b) in ex.trajectories.iter().zip(&scene.trajectories) {
            for (p, q) in a.positions.iter().zip(&b.positions) {
                assert!((p.x - q.x).abs() <= 5e-7 && (p.y - q.y).abs() <= 5e-7);
            }
        }
        // Files hold 32-bit floats.
        let mix = scene.render_wave(LayoutKind::Surround51).unwrap();
        for (a, b) in ex.mix51.channels.iter().zip(&mix.channels) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
            }
        }
    }
}
