//! Georeferencing and catalog properties.

use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;
use sidescan::georef::{
    local_distance, offset_position, pixel_to_geo, read_csv, read_geojson, to_csv_string, to_geojson_string, Layback,
    PixelGeoContext, RowNav, EARTH_RADIUS_M,
};
use sidescan::{GeoObject, NavFix, Side};

/// (lat, lon, bearing, d, lat2, lon2): direct geodesic problem on a sphere of
/// radius 6371000 m, solved with GeographicLib (Karney) and frozen here.
const SPHERE_DIRECT: &[(f64, f64, f64, f64, f64, f64)] = &[
    (0.0, -68.5, 0.0, 25.0, 0.000224830401, -68.500000000000),
    (0.0, -68.5, 0.0, 150.0, 0.001348982409, -68.500000000000),
    (0.0, -68.5, 0.0, 500.0, 0.004496608030, -68.500000000000),
    (0.0, -68.5, 37.0, 25.0, 0.000179557542, -68.499864693687),
    (0.0, -68.5, 37.0, 150.0, 0.001077345254, -68.499188162120),
    (0.0, -68.5, 37.0, 500.0, 0.003591150846, -68.497293873731),
    (0.0, -68.5, 90.0, 25.0, 0.000000000000, -68.499775169599),
    (0.0, -68.5, 90.0, 150.0, 0.000000000000, -68.498651017591),
    (0.0, -68.5, 90.0, 500.0, 0.000000000000, -68.495503391970),
    (0.0, -68.5, 143.0, 25.0, -0.000179557542, -68.499864693687),
    (0.0, -68.5, 143.0, 150.0, -0.001077345254, -68.499188162120),
    (0.0, -68.5, 143.0, 500.0, -0.003591150846, -68.497293873731),
    (0.0, -68.5, 200.0, 25.0, -0.000211271469, -68.500076896526),
    (0.0, -68.5, 200.0, 150.0, -0.001267628815, -68.500461379157),
    (0.0, -68.5, 200.0, 500.0, -0.004225429383, -68.501537930526),
    (0.0, -68.5, 271.0, 25.0, 0.000003923832, -68.500224796159),
    (0.0, -68.5, 271.0, 150.0, 0.000023542989, -68.501348776952),
    (0.0, -68.5, 271.0, 500.0, 0.000078476631, -68.504495923174),
    (0.0, -68.5, 315.0, 25.0, 0.000158979102, -68.500158979101),
    (0.0, -68.5, 315.0, 150.0, 0.000953874609, -68.500953874609),
    (0.0, -68.5, 315.0, 500.0, 0.003179582028, -68.503179582033),
    (-33.5, -68.5, 0.0, 25.0, -33.499775169599, -68.500000000000),
    (-33.5, -68.5, 0.0, 150.0, -33.498651017591, -68.500000000000),
    (-33.5, -68.5, 0.0, 500.0, -33.495503391970, -68.500000000000),
    (-33.5, -68.5, 37.0, 25.0, -33.499820442352, -68.499837740337),
    (-33.5, -68.5, 37.0, 150.0, -33.498922650939, -68.499026452118),
    (-33.5, -68.5, 37.0, 500.0, -33.496408806857, -68.496754934624),
    (-33.5, -68.5, 90.0, 25.0, -33.499999999708, -68.499730382271),
    (-33.5, -68.5, 90.0, 150.0, -33.499999989489, -68.498382293627),
    (-33.5, -68.5, 90.0, 500.0, -33.499999883211, -68.494607645428),
    (-33.5, -68.5, 143.0, 25.0, -33.500179557437, -68.499837739664),
    (-33.5, -68.5, 143.0, 150.0, -33.501077341447, -68.499026427885),
    (-33.5, -68.5, 143.0, 500.0, -33.503591108545, -68.496754665368),
    (-33.5, -68.5, 200.0, 25.0, -33.500211271435, -68.500092214919),
    (-33.5, -68.5, 200.0, 150.0, -33.501267627586, -68.500553296268),
    (-33.5, -68.5, 200.0, 500.0, -33.504225415721, -68.501844383918),
    (-33.5, -68.5, 271.0, 25.0, -33.499996075877, -68.500269576653),
    (-33.5, -68.5, 271.0, 150.0, -33.499976446503, -68.501617459549),
    (-33.5, -68.5, 271.0, 500.0, -33.499921406616, -68.505391528403),
    (-33.5, -68.5, 315.0, 25.0, -33.499841020753, -68.500190648174),
    (-33.5, -68.5, 315.0, 150.0, -33.499046120136, -68.501143878542),
    (-33.5, -68.5, 315.0, 500.0, -33.496820359579, -68.503812830442),
    (48.4, -68.5, 0.0, 25.0, 48.400224830401, -68.500000000000),
    (48.4, -68.5, 0.0, 150.0, 48.401348982409, -68.500000000000),
    (48.4, -68.5, 0.0, 500.0, 48.404496608030, -68.500000000000),
    (48.4, -68.5, 37.0, 25.0, 48.400179557362, -68.499796202065),
    (48.4, -68.5, 37.0, 150.0, 48.401077338776, -68.498777190811),
    (48.4, -68.5, 37.0, 500.0, 48.403591078861, -68.495923767931),
    (48.4, -68.5, 90.0, 25.0, 48.399999999503, -68.499661362366),
    (48.4, -68.5, 90.0, 150.0, 48.399999982114, -68.497968174199),
    (48.4, -68.5, 90.0, 500.0, 48.399999801262, -68.493227247347),
    (48.4, -68.5, 143.0, 25.0, 48.399820442278, -68.499796203504),
    (48.4, -68.5, 143.0, 150.0, 48.398922648268, -68.498777242605),
    (48.4, -68.5, 143.0, 500.0, 48.396408777180, -68.495924343415),
    (48.4, -68.5, 200.0, 25.0, 48.399788728473, -68.500115820411),
    (48.4, -68.5, 200.0, 150.0, 48.398732369093, -68.500694908035),
    (48.4, -68.5, 200.0, 500.0, 48.395774547370, -68.502316225448),
    (48.4, -68.5, 271.0, 25.0, 48.400003923335, -68.500338586083),
    (48.4, -68.5, 271.0, 150.0, 48.400023525108, -68.502031517284),
    (48.4, -68.5, 271.0, 500.0, 48.400078277953, -68.506771731576),
    (48.4, -68.5, 315.0, 25.0, 48.400158978853, -68.500239453715),
    (48.4, -68.5, 315.0, 150.0, 48.400953865666, -68.501436744743),
    (48.4, -68.5, 315.0, 500.0, 48.403179482653, -68.504789358696),
    (61.0, -68.5, 0.0, 25.0, 61.000224830401, -68.500000000000),
    (61.0, -68.5, 0.0, 150.0, 61.001348982409, -68.500000000000),
    (61.0, -68.5, 0.0, 500.0, 61.004496608030, -68.500000000000),
    (61.0, -68.5, 37.0, 25.0, 61.000179557254, -68.499720906779),
    (61.0, -68.5, 37.0, 150.0, 61.001077334878, -68.498325393339),
    (61.0, -68.5, 37.0, 500.0, 61.003591035543, -68.494417535928),
    (61.0, -68.5, 90.0, 25.0, 60.999999999204, -68.499536250124),
    (61.0, -68.5, 90.0, 150.0, 60.999999971351, -68.497217500743),
    (61.0, -68.5, 90.0, 500.0, 60.999999681679, -68.490725002533),
    (61.0, -68.5, 143.0, 25.0, 60.999820442169, -68.499720909935),
    (61.0, -68.5, 143.0, 150.0, 60.998922644370, -68.498325506946),
    (61.0, -68.5, 143.0, 500.0, 60.996408733877, -68.494418798237),
    (61.0, -68.5, 200.0, 25.0, 60.999788728438, -68.500158610744),
    (61.0, -68.5, 200.0, 150.0, 60.998732367834, -68.500951632813),
    (61.0, -68.5, 200.0, 500.0, 60.995774533385, -68.503171813996),
    (61.0, -68.5, 271.0, 25.0, 61.000003923036, -68.500463679302),
    (61.0, -68.5, 271.0, 150.0, 61.000023514349, -68.502782077531),
    (61.0, -68.5, 271.0, 500.0, 61.000078158406, -68.509273607754),
    (61.0, -68.5, 315.0, 25.0, 61.000158978704, -68.500327922324),
    (61.0, -68.5, 315.0, 150.0, 61.000953860284, -68.501967583189),
    (61.0, -68.5, 315.0, 500.0, 61.003179422852, -68.506559070288),
    (70.0, -68.5, 0.0, 25.0, 70.000224830401, -68.500000000000),
    (70.0, -68.5, 0.0, 150.0, 70.001348982409, -68.500000000000),
    (70.0, -68.5, 0.0, 500.0, 70.004496608030, -68.500000000000),
    (70.0, -68.5, 37.0, 25.0, 70.000179557103, -68.499604387400),
    (70.0, -68.5, 37.0, 150.0, 70.001077329451, -68.497626222203),
    (70.0, -68.5, 37.0, 500.0, 70.003590975235, -68.492086453401),
    (70.0, -68.5, 90.0, 25.0, 69.999999998788, -68.499342639883),
    (70.0, -68.5, 90.0, 150.0, 69.999999956369, -68.496055839303),
    (70.0, -68.5, 90.0, 500.0, 69.999999515212, -68.486852797861),
    (70.0, -68.5, 143.0, 25.0, 69.999820442019, -68.499604394212),
    (70.0, -68.5, 143.0, 150.0, 69.998922638944, -68.497626467456),
    (70.0, -68.5, 143.0, 500.0, 69.996408673603, -68.492089178433),
    (70.0, -68.5, 200.0, 25.0, 69.999788728389, -68.500224828124),
    (70.0, -68.5, 200.0, 150.0, 69.998732366081, -68.501348900415),
    (70.0, -68.5, 200.0, 500.0, 69.995774513919, -68.504495697111),
    (70.0, -68.5, 271.0, 25.0, 70.000003922620, -68.500657260122),
    (70.0, -68.5, 271.0, 150.0, 70.000023499372, -68.503943564435),
    (70.0, -68.5, 271.0, 500.0, 70.000077991989, -68.513145249224),
    (70.0, -68.5, 315.0, 25.0, 70.000158978496, -68.500464827340),
    (70.0, -68.5, 315.0, 150.0, 70.000953852793, -68.502789070351),
    (70.0, -68.5, 315.0, 500.0, 70.003179339598, -68.509297893508),
    (-70.0, -68.5, 0.0, 25.0, -69.999775169599, -68.500000000000),
    (-70.0, -68.5, 0.0, 150.0, -69.998651017591, -68.500000000000),
    (-70.0, -68.5, 0.0, 500.0, -69.995503391970, -68.500000000000),
    (-70.0, -68.5, 37.0, 25.0, -69.999820442019, -68.499604394212),
    (-70.0, -68.5, 37.0, 150.0, -69.998922638944, -68.497626467456),
    (-70.0, -68.5, 37.0, 500.0, -69.996408673603, -68.492089178433),
    (-70.0, -68.5, 90.0, 25.0, -69.999999998788, -68.499342639883),
    (-70.0, -68.5, 90.0, 150.0, -69.999999956369, -68.496055839303),
    (-70.0, -68.5, 90.0, 500.0, -69.999999515212, -68.486852797861),
    (-70.0, -68.5, 143.0, 25.0, -70.000179557103, -68.499604387400),
    (-70.0, -68.5, 143.0, 150.0, -70.001077329451, -68.497626222203),
    (-70.0, -68.5, 143.0, 500.0, -70.003590975235, -68.492086453401),
    (-70.0, -68.5, 200.0, 25.0, -70.000211271327, -68.500224832679),
    (-70.0, -68.5, 200.0, 150.0, -70.001267623711, -68.501349064413),
    (-70.0, -68.5, 200.0, 500.0, -70.004225372663, -68.504497519317),
    (-70.0, -68.5, 271.0, 25.0, -69.999996074957, -68.500657259874),
    (-70.0, -68.5, 271.0, 150.0, -69.999976413393, -68.503943555530),
    (-70.0, -68.5, 271.0, 500.0, -69.999921038731, -68.513145150289),
    (-70.0, -68.5, 315.0, 25.0, -69.999841020293, -68.500464820253),
    (-70.0, -68.5, 315.0, 150.0, -69.999046103577, -68.502788815215),
    (-70.0, -68.5, 315.0, 500.0, -69.996820175615, -68.509295058659),
];

#[test]
fn flat_offset_matches_geodesic_reference_within_10_cm() {
    let mut worst: f64 = 0.0;
    for &(lat, lon, bearing, d, lat2, lon2) in SPHERE_DIRECT {
        let got = offset_position(lat, lon, bearing, d);
        let err = local_distance(got, (lat2, lon2));
        worst = worst.max(err);
        assert!(err <= 0.1, "lat {lat} bearing {bearing} d {d}: {err} m");
    }
    // the table must actually exercise the long end of the range
    assert!(worst > 0.01, "{worst}");
}

fn track(n: usize, heading: f32, start: (f64, f64)) -> Vec<RowNav> {
    let t0 = Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap();
    (0..n)
        .map(|i| {
            let (lat, lon) = offset_position(start.0, start.1, heading as f64, i as f64 * 0.5);
            let t = t0 + Duration::milliseconds(100 * i as i64);
            RowNav {
                ping_number: i as u32,
                timestamp: t,
                nav: Some(NavFix::measured(lat, lon, heading, t)),
            }
        })
        .collect()
}

fn ctx(rows: &[RowNav], side: Side, res: f64) -> PixelGeoContext<'_> {
    PixelGeoContext {
        rows,
        ground_range_per_col: res,
        channel_side: side,
        layback: Layback::default(),
    }
}

#[test]
fn starboard_at_heading_zero_moves_due_east() {
    let rows = track(1, 0.0, (45.0, 10.0));
    let (lat, lon) = pixel_to_geo(0.0, 500.0, &ctx(&rows, Side::Starboard, 0.2)).unwrap();
    let expected_dlon = (100.0 / (EARTH_RADIUS_M * 45f64.to_radians().cos())).to_degrees();
    assert!((lat - 45.0).abs() < 1e-12);
    assert!((lon - 10.0 - expected_dlon).abs() < 1e-12, "{}", lon - 10.0);
}

proptest! {
    #[test]
    fn column_zero_is_the_nav_fix(
        heading in 0.0f32..360.0,
        lat in -70.0f64..70.0,
        lon in -179.0f64..179.0,
        port in any::<bool>(),
        row in 0usize..5,
    ) {
        let rows = track(5, heading, (lat, lon));
        let side = if port { Side::Port } else { Side::Starboard };
        let got = pixel_to_geo(row as f64, 0.0, &ctx(&rows, side, 0.3)).unwrap();
        let nav = rows[row].nav.as_ref().unwrap();
        prop_assert_eq!(got, (nav.latitude, nav.longitude));
    }

    #[test]
    fn port_and_starboard_mirror_about_the_track(
        heading in 0.0f32..360.0,
        lat in -70.0f64..70.0,
        lon in -179.0f64..179.0,
        col in 1.0f64..2000.0,
        res in 0.05f64..0.5,
    ) {
        let rows = track(1, heading, (lat, lon));
        let p = pixel_to_geo(0.0, col, &ctx(&rows, Side::Port, res)).unwrap();
        let s = pixel_to_geo(0.0, col, &ctx(&rows, Side::Starboard, res)).unwrap();
        prop_assert!(((p.0 + s.0) / 2.0 - lat).abs() < 1e-9);
        prop_assert!(((p.1 + s.1) / 2.0 - lon).abs() < 1e-9);
        let d = local_distance(p, s);
        prop_assert!((d - 2.0 * col * res).abs() < 1e-3 * col * res, "{} vs {}", d, 2.0 * col * res);
    }

    #[test]
    fn mapping_is_deterministic(heading in 0.0f32..360.0, col in 0.0f64..1000.0) {
        let rows = track(3, heading, (30.0, -60.0));
        let c = ctx(&rows, Side::Port, 0.2);
        prop_assert_eq!(pixel_to_geo(1.0, col, &c).unwrap(), pixel_to_geo(1.0, col, &c).unwrap());
    }
}

fn random_object(rng: &mut impl rand::Rng, id: u64) -> GeoObject {
    let t0 = Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap();
    let georef = rng.random_bool(0.9);
    let ping_first = rng.random_range(0..100_000u32);
    GeoObject {
        object_id: id,
        latitude: georef.then(|| rng.random_range(-89.0..89.0)),
        longitude: georef.then(|| rng.random_range(-180.0..180.0)),
        extent_along_m: rng.random_range(0.0..40.0),
        extent_across_m: rng.random_range(0.0..40.0),
        channel: if rng.random_bool(0.5) { Side::Port } else { Side::Starboard },
        ping_first,
        ping_last: ping_first + rng.random_range(0..200),
        feature_count: rng.random_range(1..500),
        source: format!("survey_{}.xtf", rng.random_range(0..9)),
        detected_at: t0 + Duration::milliseconds(rng.random_range(0..86_400_000i64)),
        pixel_row: rng.random_range(0.0..5000.0),
        pixel_col: rng.random_range(0.0..1000.0),
        ungeoreferenced: !georef,
        degenerate_track: false,
    }
}

fn by_id(mut v: Vec<GeoObject>) -> Vec<GeoObject> {
    v.sort_by_key(|o| o.object_id);
    v
}

#[test]
fn geojson_round_trip_keeps_positions_to_1e7_degrees() {
    use rand::SeedableRng;
    for seed in 0..5u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let objects: Vec<GeoObject> = (0..50).map(|i| random_object(&mut rng, i)).collect();
        let text = to_geojson_string(&objects);
        assert_eq!(text, to_geojson_string(&objects));
        let back = by_id(read_geojson(&text).unwrap());
        assert_eq!(back.len(), 50);
        for (a, b) in objects.iter().zip(&back) {
            assert_eq!(a.object_id, b.object_id);
            assert_eq!(a.latitude.is_some(), b.latitude.is_some());
            if let (Some(x), Some(y)) = (a.latitude, b.latitude) {
                assert!((x - y).abs() <= 1e-7);
                assert!((a.longitude.unwrap() - b.longitude.unwrap()).abs() <= 1e-7);
            }
            assert_eq!(a.channel, b.channel);
            assert_eq!((a.ping_first, a.ping_last, a.feature_count), (b.ping_first, b.ping_last, b.feature_count));
            assert_eq!(a.detected_at, b.detected_at);
            assert_eq!(a.source, b.source);
        }
    }
}

#[test]
fn csv_round_trip_keeps_catalog_columns() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let objects: Vec<GeoObject> = (0..50).map(|i| random_object(&mut rng, i)).collect();
    let back = by_id(read_csv(&to_csv_string(&objects)).unwrap());
    assert_eq!(back.len(), 50);
    for (a, b) in objects.iter().zip(&back) {
        assert_eq!(a.object_id, b.object_id);
        if let (Some(x), Some(y)) = (a.latitude, b.latitude) {
            assert!((x - y).abs() <= 1e-7);
        } else {
            assert_eq!(a.latitude, b.latitude);
        }
        assert_eq!(a.detected_at, b.detected_at);
        assert!((a.extent_across_m - b.extent_across_m).abs() < 1e-6);
    }
}
