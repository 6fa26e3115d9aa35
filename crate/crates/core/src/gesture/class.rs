use std::fmt;

/// Number of gesture classes in the reference dataset.
pub const NUM_GESTURES: usize = 15;

/// Gesture names in lookup-table row order; the position is the class index.
pub const GESTURE_NAMES: [&str; NUM_GESTURES] = [
    "Thumb",
    "Index",
    "Middle",
    "Ring",
    "Little",
    "Thumb-Index",
    "Thumb-Middle",
    "Thumb-Ring",
    "Thumb-Little",
    "Hand Close",
    "Index-Middle",
    "Middle-Ring",
    "Ring-Little",
    "Index-Middle-Ring",
    "Middle-Ring-Little",
];

/// One of the 15 finger-flexion gestures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GestureClass(u8);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("gesture index {0} out of range (expected < {NUM_GESTURES})")]
pub struct InvalidGesture(pub usize);

impl GestureClass {
    pub const THUMB: Self = Self(0);
    pub const HAND_CLOSE: Self = Self(9);

    pub fn new(index: usize) -> Result<Self, InvalidGesture> {
        if index < NUM_GESTURES {
            Ok(Self(index as u8))
        } else {
            Err(InvalidGesture(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        GESTURE_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        GESTURE_NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .map(|i| Self(i as u8))
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..NUM_GESTURES as u8).map(Self)
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<usize> for GestureClass {
    type Error = InvalidGesture;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}
