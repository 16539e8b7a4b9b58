use pifcm::bench::{benchmark_run, write_report_csv, BenchInput, BenchSpec, REPORT_COLUMNS};
use pifcm::metrics::{evaluate, mean_incs};
use pifcm::pipelines::run_algorithm;
use pifcm::volume::{extract_slice, load_labels, load_volume, save_labels, save_volume};
use pifcm::{
    add_noise, generate_phantom, Algorithm, Axis, Dims, IncsVariant, NoiseKind, NoiseSpec,
    PhantomSpec, PipelineConfig, SliceRef,
};

fn phantom(edge: usize) -> (pifcm::Volume, pifcm::LabelVolume) {
    let dims = Dims::new(edge, edge, edge).unwrap();
    generate_phantom(&PhantomSpec::with_defaults(dims, 4)).unwrap()
}

#[test]
fn phantom_survives_a_disk_round_trip() {
    let (vol, labels) = phantom(20);
    let noisy = add_noise(&vol, &NoiseSpec::new(NoiseKind::Poisson, 7.0, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (vp, lp) = (dir.path().join("v.vxf"), dir.path().join("l.vxf"));
    save_volume(&noisy, &vp).unwrap();
    save_labels(&labels, &lp).unwrap();
    assert_eq!(load_volume(&vp).unwrap(), noisy);
    assert_eq!(load_labels(&lp).unwrap(), labels);
}

#[test]
fn slices_restack_along_every_axis() {
    let (vol, _) = phantom(12);
    let dims = vol.dims();
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        for index in 0..dims.extent(axis) {
            let plane = extract_slice(&vol, SliceRef::new(axis, index)).unwrap();
            for (k, &i) in SliceRef::new(axis, index)
                .plane_indices(dims)
                .iter()
                .enumerate()
            {
                assert_eq!(plane.data()[k], vol.data()[i]);
            }
        }
    }
}

#[test]
fn attraction_cleans_up_a_noisy_slice() {
    let (vol, truth) = phantom(48);
    let noisy = add_noise(&vol, &NoiseSpec::new(NoiseKind::Gaussian, 10.0, 3)).unwrap();
    let slice = SliceRef::z(24);
    let t = truth.extract_slice(slice).unwrap();
    let cfg = PipelineConfig::new(4, 3);
    let score = |alg| {
        let res = run_algorithm(alg, &noisy, slice, &cfg).unwrap();
        mean_incs(&evaluate(&res.labels, &t, 4, IncsVariant::ErrorFraction).unwrap())
    };
    let plain = score(Algorithm::ModifiedFcm);
    let volumetric = score(Algorithm::Pifcm3d);
    assert!(
        volumetric < 0.5 * plain,
        "3dpifcm {volumetric} vs mfcm {plain}"
    );
}

#[test]
fn report_rows_follow_the_documented_schema() {
    let spec = BenchSpec {
        input: BenchInput::Phantom(PhantomSpec::with_defaults(
            Dims::new(16, 16, 16).unwrap(),
            2,
        )),
        slice: SliceRef::z(8),
        algorithms: vec![Algorithm::Fcm, Algorithm::Pifcm3d],
        noise_kinds: vec![NoiseKind::Gaussian, NoiseKind::Poisson],
        noise_levels: vec![3.0],
        seeds: vec![1],
        pipeline: PipelineConfig::new(2, 0),
        incs_variant: IncsVariant::ErrorFraction,
        per_cluster_rows: false,
    };
    let report = benchmark_run(&spec).unwrap();
    let mut buf = Vec::new();
    write_report_csv(&report, false, &mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        REPORT_COLUMNS
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(&row[4], "all");
        assert_eq!(&row[14], "ok");
        let incs: f64 = row[7].parse().unwrap();
        assert!((0.0..=1.0).contains(&incs));
        // h and v only apply to the volumetric pipeline
        assert_eq!(row[10].is_empty(), &row[0] == "fcm");
    }
}
