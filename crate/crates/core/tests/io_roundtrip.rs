use std::fs;

use adalam::io::{
    read_errors, read_keypoints, read_matches, write_keypoints, write_matches, write_seed_reports,
};
use adalam::synth::{generate_scene, SynthConfig};
use adalam::{adalam_filter, AdalamParams, Error};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-30)
}

#[test]
fn keypoints_and_matches_survive_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // 5 x 20 inliers + 900 outliers: 1000 matches.
    let scene = generate_scene(&SynthConfig {
        n_outliers: 900,
        noise_sigma: 0.8,
        rng_seed: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    assert_eq!(scene.matches.len(), 1000);

    let kp_path = dir.path().join("kp1.txt");
    let small = adalam::KeypointSet::new(scene.k1.as_slice()[..100].to_vec()).unwrap();
    write_keypoints(&kp_path, scene.size1, &small).unwrap();
    let (size, back) = read_keypoints(&kp_path).unwrap();
    assert_eq!(size, scene.size1);
    assert_eq!(back.len(), 100);
    for (a, b) in small.iter().zip(back.iter()) {
        assert!(close(a.x, b.x) && close(a.y, b.y) && close(a.sigma, b.sigma));
        assert!(close(a.alpha, b.alpha));
        for (u, v) in a.descriptor.iter().zip(&b.descriptor) {
            assert!(close(f64::from(*u), f64::from(*v)));
        }
    }

    let m_path = dir.path().join("matches.txt");
    write_matches(&m_path, &scene.matches, Some(&scene.gt_inlier)).unwrap();
    let file = read_matches(&m_path).unwrap();
    assert_eq!(file.gt.as_deref(), Some(&scene.gt_inlier[..]));
    for (a, b) in scene.matches.iter().zip(&file.matches) {
        assert_eq!((a.idx1, a.idx2), (b.idx1, b.idx2));
        assert!(close(a.dist, b.dist) && close(a.ratio, b.ratio));
    }
}

#[test]
fn filtering_reloaded_files_gives_the_same_selection() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate_scene(&SynthConfig {
        rng_seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let p1 = dir.path().join("k1.txt");
    let p2 = dir.path().join("k2.txt");
    let pm = dir.path().join("m.txt");
    write_keypoints(&p1, scene.size1, &scene.k1).unwrap();
    write_keypoints(&p2, scene.size2, &scene.k2).unwrap();
    write_matches(&pm, &scene.matches, None).unwrap();
    let (s1, k1) = read_keypoints(&p1).unwrap();
    let (s2, k2) = read_keypoints(&p2).unwrap();
    let m = read_matches(&pm).unwrap().matches;
    let params = AdalamParams::default();
    let direct = adalam_filter(
        &scene.k1,
        &scene.k2,
        scene.size1,
        scene.size2,
        &scene.matches,
        &params,
    )
    .unwrap();
    let reloaded = adalam_filter(&k1, &k2, s1, s2, &m, &params).unwrap();
    assert_eq!(direct.selected, reloaded.selected);

    let pr = dir.path().join("seeds.txt");
    write_seed_reports(&pr, &reloaded.seed_reports).unwrap();
    let text = fs::read_to_string(&pr).unwrap();
    assert_eq!(text.lines().count(), reloaded.seed_reports.len() + 1);
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.txt");
    fs::write(&p, "ADALAM-MATCHES 1 2 0\n0 1 0.5 0.3\n1 2 0.5 1.7\n").unwrap();
    match read_matches(&p) {
        Err(Error::Parse { line, path, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(path, p);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    fs::write(&p, "1.5 inf\n-2\n").unwrap();
    assert!(matches!(read_errors(&p), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(
        read_keypoints(&dir.path().join("missing.txt")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn failed_write_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("no_such_dir").join("m.txt");
    let scene = generate_scene(&SynthConfig::default()).unwrap();
    assert!(write_matches(&target, &scene.matches, None).is_err());
    assert!(!target.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}
