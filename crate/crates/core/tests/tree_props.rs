use beamtree::tree::Tree;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subtrees_partition_every_level(m in 1usize..300, b in 2usize..6, seed in any::<u64>()) {
        let tree = Tree::random(m, b, seed).unwrap();
        let leaves = tree.leaves();
        for h in 0..=tree.height() {
            let mut covered = Vec::new();
            for n in tree.level_nodes(h) {
                let under = tree.subtree_leaves(n).unwrap();
                for l in under {
                    prop_assert_eq!(tree.ancestor_at_level(l, tree.level(n)).unwrap(), n);
                    covered.push(l);
                }
            }
            covered.sort_unstable();
            prop_assert_eq!(covered, leaves.clone().collect::<Vec<_>>());
        }
    }

    #[test]
    fn path_length_is_level(m in 1usize..300, b in 2usize..6, seed in any::<u64>()) {
        let tree = Tree::random(m, b, seed).unwrap();
        for n in 0..tree.num_nodes() {
            prop_assert_eq!(tree.path_to_root(n).unwrap().len(), tree.level(n));
        }
    }

    #[test]
    fn parent_child_maps_agree(m in 1usize..300, b in 2usize..6, seed in any::<u64>()) {
        let tree = Tree::random(m, b, seed).unwrap();
        prop_assert_eq!(tree.parent(0), None);
        for n in 0..tree.num_nodes() {
            let kids = tree.children(n);
            prop_assert!(kids.len() <= b);
            prop_assert_eq!(kids.is_empty(), tree.is_leaf(n));
            for c in kids {
                prop_assert_eq!(tree.parent(c), Some(n));
                prop_assert_eq!(tree.level(c), tree.level(n) + 1);
            }
        }
        prop_assert_eq!(tree.leaves().len(), m);
        let mut targets: Vec<_> = tree.leaf_to_target().to_vec();
        targets.sort_unstable();
        prop_assert_eq!(targets, (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn rebuild_is_byte_identical(m in 1usize..300, b in 2usize..6, seed in any::<u64>()) {
        let a = serde_json::to_string(&Tree::random(m, b, seed).unwrap().to_file()).unwrap();
        let c = serde_json::to_string(&Tree::random(m, b, seed).unwrap().to_file()).unwrap();
        prop_assert_eq!(&a, &c);
        let back = Tree::from_file(serde_json::from_str(&a).unwrap()).unwrap();
        prop_assert_eq!(serde_json::to_string(&back.to_file()).unwrap(), a);
    }
}

#[test]
fn thousand_leaf_binary_tree_shape() {
    let tree = Tree::random(1000, 2, 0).unwrap();
    assert_eq!(tree.height(), 10);
    assert_eq!(tree.level_nodes(10).len(), 1000);
    assert_eq!(tree.level_nodes(8).len(), 250);
}

#[test]
fn bad_tree_files_are_rejected() {
    let mut file = Tree::random(10, 2, 1).unwrap().to_file();
    file.height += 1;
    assert!(Tree::from_file(file.clone()).is_err());
    file.height -= 1;
    file.leaf_to_target[0] = file.leaf_to_target[1];
    assert!(Tree::from_file(file).is_err());
}
