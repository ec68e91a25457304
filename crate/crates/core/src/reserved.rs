//! Reserved vocabulary items. They occupy the lowest ids of every vocabulary
//! and never come out of segmenting raw text.

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const CLEAN_SRC: &str = "<clean>";
pub const NOISY_SRC: &str = "<noisy>";
pub const CLEAN_TGT: &str = "<clean_s>";
pub const NOISY_TGT: &str = "<noisy_s>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;

/// In id order.
pub const RESERVED: [&str; 8] = [
    PAD, UNK, BOS, EOS, CLEAN_SRC, NOISY_SRC, CLEAN_TGT, NOISY_TGT,
];

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

pub fn reserved_id(token: &str) -> Option<usize> {
    RESERVED.iter().position(|r| *r == token)
}
