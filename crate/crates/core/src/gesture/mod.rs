//! Gesture classes, the reference network, training and evaluation.

mod arch;
mod class;
mod train;

pub use arch::{build_paper_network, variant_network, ArchVariant};
pub use class::{GestureClass, InvalidGesture, GESTURE_NAMES, NUM_GESTURES};
pub use train::{
    evaluate, train, train_with, Confusion, EpochRecord, Metrics, TrainError, TrainingConfig,
};

use crate::nn::Scalar;

/// One-hot target vector.
pub fn one_hot(class: usize, num_classes: usize) -> Result<Vec<f32>, InvalidGesture> {
    if class >= num_classes {
        return Err(InvalidGesture(class));
    }
    let mut v = vec![0.0; num_classes];
    v[class] = 1.0;
    Ok(v)
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax<T: Scalar>(probs: &[T]) -> usize {
    probs
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best })
}

/// Decided class for one probability vector.
pub fn predict_class<T: Scalar>(probs: &[T]) -> Result<GestureClass, InvalidGesture> {
    GestureClass::new(argmax(probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::softmax;
    use proptest::prelude::*;

    #[test]
    fn one_hot_examples() {
        let v = one_hot(GestureClass::THUMB.index(), 15).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v.iter().sum::<f32>(), 1.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(one_hot(15, 15), Err(InvalidGesture(15)));
    }

    #[test]
    fn prediction_tie_break() {
        assert_eq!(
            predict_class(&[1.0f32 / 15.0; 15]).unwrap(),
            GestureClass::THUMB
        );
        let v = one_hot(12, 15).unwrap();
        assert_eq!(predict_class(&v).unwrap().index(), 12);
    }

    proptest! {
        #[test]
        fn prediction_invariant_under_shift_and_scale(
            logits in proptest::collection::vec(-20.0f64..20.0, 15),
            shift in -100.0f64..100.0,
            scale in 0.05f64..20.0,
        ) {
            let base = predict_class(&softmax(&logits)).unwrap();
            let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
            let scaled: Vec<f64> = logits.iter().map(|z| z * scale).collect();
            prop_assert_eq!(predict_class(&softmax(&shifted)).unwrap(), base);
            prop_assert_eq!(predict_class(&softmax(&scaled)).unwrap(), base);
        }
    }
}
