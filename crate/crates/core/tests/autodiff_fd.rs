//! Reverse-mode gradients against central finite differences on random graphs.

mod common;

use common::graphs::{check, Inputs, Op, COLS, SHAPES};
use lbs_core::diffnum::Matrix;
use proptest::prelude::*;

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::AddLeaf),
        Just(Op::SubLeaf),
        Just(Op::MulLeaf),
        Just(Op::DivPositive),
        Just(Op::MinLeaf),
        Just(Op::AddRow),
        Just(Op::MulRow),
        Just(Op::MulCol),
        Just(Op::Neg),
        (-2.0..2.0f64).prop_map(Op::Scale),
        (-1.0..1.0f64).prop_map(Op::Offset),
        Just(Op::Relu),
        Just(Op::LeakyRelu),
        Just(Op::Softplus),
        Just(Op::DampedExp),
        Just(Op::LogSoftplus),
        Just(Op::Square),
        Just(Op::Clamp),
        Just(Op::MatMul),
        (0..=COLS).prop_map(Op::ConcatSlice),
    ]
}

fn inputs_strategy() -> impl Strategy<Value = Inputs> {
    let parts: Vec<_> = SHAPES
        .iter()
        .map(|&(r, c)| prop::collection::vec(-1.5..1.5f64, r * c).prop_map(move |v| Matrix::from_vec(r, c, v)))
        .collect();
    parts.prop_map(|leaves| Inputs { leaves })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, max_global_rejects: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn gradients_match_central_differences(
        ops in prop::collection::vec(op_strategy(), 1..7),
        inputs in inputs_strategy(),
    ) {
        let checked = check(&ops, &inputs);
        prop_assert!(checked.is_ok(), "{}", checked.unwrap_err());
        prop_assume!(checked.unwrap());
    }
}
