use aedl::data::{
    augment_mirror, generate_synthetic, normalize_channels, read_header, seed_split, PatchDataset, SyntheticSpec,
};
use aedl::{Error, Tensor64};
use std::path::Path;

fn labelled(n: usize, k: usize, p: usize, c: usize) -> PatchDataset<f64> {
    let patches = Tensor64::from_fn(vec![n, p, p, c], |i| (i % 97) as f64 / 10.0);
    PatchDataset::new(patches, (0..n).map(|i| i % k).collect(), k).unwrap()
}

#[test]
fn flevoland_sized_header_parses() {
    let ds = labelled(54_276, 11, 1, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flevoland.psar");
    ds.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let h = read_header(&bytes, &path).unwrap();
    assert_eq!((h.instances, h.class_count, h.height, h.width, h.channels), (54_276, 11, 1, 1, 2));
    let back = PatchDataset::<f64>::load(&path).unwrap();
    assert_eq!(back.len(), 54_276);
    assert_eq!(back.labels(), ds.labels());
}

#[test]
fn out_of_range_label_reports_its_offset() {
    let ds = labelled(4, 3, 2, 1);
    let mut bytes = ds.to_bytes().unwrap();
    let header = bytes.len() - 4 * 2 - 4 * 2 * 2 * 4;
    let label_at = header + 4 * 2 * 2 * 4 + 2 * 2;
    bytes[label_at] = 7;
    match PatchDataset::<f64>::from_bytes(&bytes) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, label_at),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn truncated_and_foreign_files_are_rejected() {
    let bytes = labelled(3, 2, 2, 2).to_bytes().unwrap();
    assert!(PatchDataset::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    assert!(read_header(b"AEDL\x01\x00", Path::new("x")).is_err());
}

#[test]
fn f32_storage_round_trips_exactly() {
    let spec = SyntheticSpec::scattered(3, 5, 4, 20, 1.0, 0.2, 0.3, 11);
    let ds: PatchDataset<f64> = generate_synthetic(&spec).unwrap();
    let once = PatchDataset::<f64>::from_bytes(&ds.to_bytes().unwrap()).unwrap();
    let twice = PatchDataset::<f64>::from_bytes(&once.to_bytes().unwrap()).unwrap();
    assert_eq!(once.patches(), twice.patches());
    for (a, b) in ds.patches().data().iter().zip(once.patches().data()) {
        assert_eq!(*a as f32 as f64, *b);
    }
}

#[test]
fn synthetic_generation_is_a_pure_function_of_the_spec() {
    let spec = SyntheticSpec::scattered(4, 5, 3, 30, 0.8, 0.3, 0.4, 2);
    let a: PatchDataset<f64> = generate_synthetic(&spec).unwrap();
    let b: PatchDataset<f64> = generate_synthetic(&spec).unwrap();
    assert_eq!(a.patches(), b.patches());
    assert_eq!(a.labels(), b.labels());
    let mut other = spec.clone();
    other.seed += 1;
    let c: PatchDataset<f64> = generate_synthetic(&other).unwrap();
    assert_ne!(a.patches(), c.patches());
    assert_eq!(a.len(), 120);
    assert_eq!(a.patch_shape(), [5, 5, 3]);
}

#[test]
fn split_pools_are_disjoint_and_stratified() {
    let ds = labelled(300, 3, 2, 1);
    let ds = seed_split(ds, 5, 100, 120, 9).unwrap();
    let s = &ds.split;
    assert!(s.is_disjoint());
    assert_eq!((s.labeled.len(), s.candidates.len(), s.test.len()), (15, 100, 120));
    for class in 0..3 {
        assert_eq!(s.labeled.iter().filter(|&&i| ds.labels()[i] == class).count(), 5);
    }
    let first = *s.candidates.iter().next().unwrap();
    let moved = ds.move_to_labeled(&[first]).unwrap();
    assert_eq!(moved.split.labeled.len(), 16);
    assert_eq!(moved.split.candidates.len(), 99);
}

#[test]
fn moving_test_or_duplicate_ids_is_rejected() {
    let ds = seed_split(labelled(60, 2, 2, 1), 2, 20, 20, 1).unwrap();
    let t = *ds.split.test.iter().next().unwrap();
    let u = *ds.split.candidates.iter().next().unwrap();
    assert!(ds.split.move_to_labeled(&[t]).is_err());
    assert!(ds.split.move_to_labeled(&[u, u]).is_err());
}

#[test]
fn short_class_is_named() {
    let ds = PatchDataset::new(Tensor64::zeros(vec![10, 1, 1, 1]), vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 1], 2).unwrap();
    let err = seed_split(ds, 2, 2, 2, 0).unwrap_err().to_string();
    assert!(err.contains("class 1"), "{err}");
}

#[test]
fn mirror_augmentation_quadruples_with_cycled_labels() {
    let x = Tensor64::from_fn(vec![2, 3, 3, 1], |i| i as f64);
    let (aug, labels) = augment_mirror(&x, &[4, 7]).unwrap();
    assert_eq!(aug.shape(), &[8, 3, 3, 1]);
    assert_eq!(labels, vec![4, 7, 4, 7, 4, 7, 4, 7]);
    assert_eq!(&aug.data()[..18], x.data());
    // Horizontal mirror of the first patch reverses each row.
    assert_eq!(&aug.data()[18..21], &[2.0, 1.0, 0.0]);
}

#[test]
fn normalization_ignores_test_pool() {
    let ds = seed_split(labelled(90, 3, 2, 2), 3, 30, 30, 4).unwrap();
    let mut shifted = ds.clone();
    let test: Vec<usize> = ds.split.test.iter().copied().collect();
    {
        let per = 2 * 2 * 2;
        let data = shifted.patches().data().to_vec();
        let mut patched = data.clone();
        for &i in &test {
            for v in &mut patched[i * per..(i + 1) * per] {
                *v += 1000.0;
            }
        }
        shifted = PatchDataset::new(Tensor64::new(vec![90, 2, 2, 2], patched).unwrap(), ds.labels().to_vec(), 3)
            .unwrap()
            .with_split(ds.split.clone())
            .unwrap();
    }
    let (_, a) = normalize_channels(ds).unwrap();
    let (_, b) = normalize_channels(shifted).unwrap();
    assert_eq!(a, b);
}
