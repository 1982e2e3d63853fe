mod common;

use common::*;
use htwave::{HtRep, TreeShape};
use proptest::prelude::*;

fn same(a: &HtRep, b: &HtRep) {
    assert_eq!(a.ranks(), b.ranks());
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        assert_eq!(fa, fb);
    }
    for node in 0..a.tree().len() {
        if !a.tree().is_leaf(node) {
            assert_eq!(a.transfer(node), b.transfer(node));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn json_roundtrip_is_exact(seed in any::<u64>(), m in 2usize..6, rank in 1usize..4, linear in any::<bool>()) {
        let t = tree(m, if linear { TreeShape::Linear } else { TreeShape::Balanced });
        let v = random_sparse_ht(&t, rank, 5, 40, 4, &mut rng(seed));
        let back = htwave::io::from_json(&htwave::io::to_json(&v)).unwrap();
        same(&v, &back);
        prop_assert_eq!(back.tree().shape(), t.shape());
    }
}

#[test]
fn zero_and_file_roundtrip() {
    let t = tree(3, TreeShape::Balanced);
    let z = HtRep::zero(t.clone());
    let back = htwave::io::from_json(&htwave::io::to_json(&z)).unwrap();
    assert!(back.is_zero());
    let path = std::env::temp_dir().join(format!("htwave-io-{}.json", std::process::id()));
    let v = random_sparse_ht(&t, 2, 6, 40, 4, &mut rng(3)).hsvd();
    htwave::io::write(&path, &v).unwrap();
    let w = htwave::io::read(&path).unwrap();
    assert!(dense_dist(&v.to_dense().unwrap(), &w.to_dense().unwrap()) == 0.0);
    std::fs::remove_file(&path).unwrap();
    assert!(htwave::io::read(&path).is_err());
}
