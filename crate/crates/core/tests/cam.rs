use std::fs;
use std::path::PathBuf;

use edgebench_core::cam::{
    parse_cam, serialize_cam, validate_cam, CamError, CamManifest, CamService, PerformanceProfile,
    QosClass, ServiceChannel, ServiceClass,
};
use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(name);
    fs::read_to_string(path).unwrap()
}

#[test]
fn acm_sample_normal_form() {
    let parsed = parse_cam(&corpus("acm-sample.yaml")).unwrap();
    assert!(parsed.warnings.is_empty());
    let expected = CamManifest {
        app_name: "acm-sample".into(),
        performance_profile: Some(PerformanceProfile::Performance),
        app_energy_limit: Some(20.0),
        app_failure_tolerance: Some(String::new()),
        scheduler_name: "qos-scheduler".into(),
        service_channels: vec![ServiceChannel {
            from_service: "front-end".into(),
            to_service: "backend".into(),
            service_class: ServiceClass::Assured,
            bandwidth_bps: 5_000_000,
            max_delay_ns: 10_000_000,
        }],
        compliance_class: Some(String::new()),
        qos_class: Some(QosClass::Gold),
        security_class: Some(String::new()),
        services: vec![
            CamService {
                name: "front-end".into(),
                image: "quay.io/skupper/hello-world-frontend".into(),
                replicas: 1,
            },
            CamService {
                name: "backend".into(),
                image: "quay.io/skupper/hello-world-backend".into(),
                replicas: 3,
            },
        ],
    };
    assert_eq!(parsed.manifest, expected);
}

#[test]
fn corpus_units_and_defaults() {
    let bookinfo = parse_cam(&corpus("bookinfo.yaml")).unwrap().manifest;
    let bw: Vec<_> = bookinfo
        .service_channels
        .iter()
        .map(|c| c.bandwidth_bps)
        .collect();
    assert_eq!(bw, vec![1_000_000, 2_500_000, 500_000]);
    assert_eq!(bookinfo.scheduler_name, "default-scheduler");
    assert_eq!(bookinfo.app_energy_limit, Some(45.5));

    let fb = parse_cam(&corpus("frontend-backend.yaml"))
        .unwrap()
        .manifest;
    assert_eq!(fb.service_channels[0].bandwidth_bps, 1_000_000_000);
    assert_eq!(fb.service_channels[0].max_delay_ns, 250_000);

    let parking = parse_cam(&corpus("uc-smart-parking.yaml"))
        .unwrap()
        .manifest;
    assert_eq!(parking.service_channels[1].max_delay_ns, 1_000_000_000);
    assert_eq!(parking.qos_class, Some(QosClass::Bronze));

    let pause = parse_cam(&corpus("pause.yaml")).unwrap().manifest;
    assert_eq!(pause.services[0].replicas, 150);
    assert!(pause.service_channels.is_empty());
}

#[test]
fn corpus_is_valid_and_round_trips() {
    for name in [
        "acm-sample.yaml",
        "bookinfo.yaml",
        "frontend-backend.yaml",
        "pause.yaml",
        "uc-smart-parking.yaml",
    ] {
        let m = parse_cam(&corpus(name)).unwrap().manifest;
        assert!(validate_cam(&m).is_empty(), "{name}");
        assert_eq!(parse_cam(&serialize_cam(&m)).unwrap().manifest, m, "{name}");
    }
}

#[test]
fn dangling_channel_is_rejected() {
    let text = corpus("acm-sample.yaml").replace("to: backend", "to: cache");
    match parse_cam(&text) {
        Err(CamError::Violations(v)) => {
            assert!(v.iter().any(|v| v.field.contains("serviceChannels")))
        }
        Ok(p) => assert!(!validate_cam(&p.manifest).is_empty()),
        Err(e) => panic!("unexpected {e}"),
    }
}

#[test]
fn missing_unit_is_an_error() {
    let text = corpus("acm-sample.yaml").replace("\"10ms\"", "\"10\"");
    assert!(parse_cam(&text).is_err());
}

fn word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,10}"
}

fn free_text() -> impl Strategy<Value = String> {
    "[ -~]{0,16}"
}

fn manifest() -> impl Strategy<Value = CamManifest> {
    let services = vec((word(), "[a-z0-9./:_-]{1,24}", 1u32..20), 1..6);
    (
        word(),
        prop::option::of(prop_oneof![
            Just(PerformanceProfile::Performance),
            Just(PerformanceProfile::Greenness),
            Just(PerformanceProfile::Cost),
        ]),
        prop::option::of((0u32..100_000).prop_map(|v| f64::from(v) / 100.0)),
        prop::option::of(free_text()),
        word(),
        prop::option::of(prop_oneof![
            Just(QosClass::Gold),
            Just(QosClass::Silver),
            Just(QosClass::Bronze)
        ]),
        prop::option::of(free_text()),
        prop::option::of(free_text()),
        services,
        vec(
            (
                0usize..6,
                0usize..6,
                any::<bool>(),
                1u64..5_000_000_000,
                1u64..10_000_000_000,
            ),
            0..8,
        ),
    )
        .prop_map(
            |(
                app,
                profile,
                energy,
                tolerance,
                scheduler,
                qos,
                compliance,
                security,
                raw_services,
                raw_channels,
            )| {
                let mut services: Vec<CamService> = Vec::new();
                for (name, image, replicas) in raw_services {
                    if services.iter().all(|s| s.name != name) {
                        services.push(CamService {
                            name,
                            image,
                            replicas,
                        });
                    }
                }
                let mut channels: Vec<ServiceChannel> = Vec::new();
                for (a, b, assured, bw, delay) in raw_channels {
                    let (a, b) = (a % services.len(), b % services.len());
                    let (from, to) = (&services[a].name, &services[b].name);
                    if a == b
                        || channels
                            .iter()
                            .any(|c| &c.from_service == from && &c.to_service == to)
                    {
                        continue;
                    }
                    channels.push(ServiceChannel {
                        from_service: from.clone(),
                        to_service: to.clone(),
                        service_class: if assured {
                            ServiceClass::Assured
                        } else {
                            ServiceClass::BestEffort
                        },
                        bandwidth_bps: bw,
                        max_delay_ns: delay,
                    });
                }
                CamManifest {
                    app_name: app,
                    performance_profile: profile,
                    app_energy_limit: energy,
                    app_failure_tolerance: tolerance,
                    scheduler_name: scheduler,
                    service_channels: channels,
                    compliance_class: compliance,
                    qos_class: qos,
                    security_class: security,
                    services,
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_manifests_round_trip(m in manifest()) {
        prop_assert!(validate_cam(&m).is_empty());
        let text = serialize_cam(&m);
        let back = parse_cam(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back.manifest, m);
        prop_assert_eq!(serialize_cam(&parse_cam(&text).unwrap().manifest), text);
    }
}

fn mutate(rng: &mut ChaCha8Rng, seed_text: &str) -> String {
    let mut bytes = seed_text.as_bytes().to_vec();
    for _ in 0..rng.gen_range(1..8) {
        match rng.gen_range(0..4) {
            0 if !bytes.is_empty() => {
                let i = rng.gen_range(0..bytes.len());
                bytes.remove(i);
            }
            1 => {
                let i = rng.gen_range(0..=bytes.len());
                let pool = b" :-\"'#\n\t[]{}5Mms";
                bytes.insert(i, pool[rng.gen_range(0..pool.len())]);
            }
            2 if !bytes.is_empty() => {
                let i = rng.gen_range(0..bytes.len());
                bytes[i] = rng.gen();
            }
            _ => {
                let cut = rng.gen_range(0..=bytes.len());
                bytes.truncate(cut);
            }
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

#[test]
fn mutated_inputs_never_panic() {
    let seeds = [corpus("acm-sample.yaml"), corpus("bookinfo.yaml")];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..20_000 {
        let text = mutate(&mut rng, &seeds[i % 2]);
        let _ = parse_cam(&text);
    }
}
