//! Tape gradients against central finite differences in `f64`.

mod common;

use common::suite::run_case;

macro_rules! grad_tests {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                let (err, tol, at) = run_case(stringify!($name));
                println!("{}: worst relative error {err:.3e}", stringify!($name));
                assert!(err <= tol, "{}: relative error {err:.3e} at {at}", stringify!($name));
            }
        )*
    };
}

grad_tests!(
    conv1x1, conv1x1_nobias, dwconv3, dwconv7, layer_norm, gap, relu, sigmoid, tanh, add_broadcast,
    sub_broadcast, mul_broadcast, div_broadcast, affine, pow, clamp, blur, avg_pool2, mean, features, luma,
    ssim, msef, dsconv, cwa, nano_model, msssim_loss,
);

#[test]
fn every_case_is_covered() {
    assert_eq!(common::suite::CASE_NAMES.len(), 27);
}
