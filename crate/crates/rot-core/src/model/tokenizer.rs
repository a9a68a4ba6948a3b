//! Whitespace word-level tokenizer over a fixture lexicon.
//!
//! The lexicon is a UTF-8 text file, one token per line, line number = id.
//! Punctuation is peeled off word edges during encoding (interior
//! apostrophes as in `Let's` stay put); out-of-lexicon words map to
//! `<unk>`.

use std::collections::HashMap;
use std::path::Path;

use super::ModelError;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Characters peeled from word edges into their own tokens.
const EDGE_PUNCT: &[char] = &['.', ',', '?', '!', ':', ';', '(', ')', '"', '\''];

#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    bos: u32,
    eos: u32,
    unk: u32,
}

impl Tokenizer {
    /// Build from lexicon lines (one token per line, blank lines rejected).
    pub fn from_lines<I, S>(lines: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vec::new();
        let mut ids = HashMap::new();
        for line in lines {
            let token = line.as_ref().trim_end_matches(['\r', '\n']).to_string();
            if token.is_empty() {
                return Err(ModelError::Lexicon("blank lexicon line".into()));
            }
            if ids.insert(token.clone(), vocab.len() as u32).is_some() {
                return Err(ModelError::Lexicon(format!("duplicate token {token:?}")));
            }
            vocab.push(token);
        }
        let special = |name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| ModelError::Lexicon(format!("lexicon is missing {name}")))
        };
        let (bos, eos, unk) = (special(BOS)?, special(EOS)?, special(UNK)?);
        Ok(Self { vocab, ids, bos, eos, unk })
    }

    pub fn from_lexicon_str(text: &str) -> Result<Self, ModelError> {
        Self::from_lines(text.lines())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Lexicon(format!("cannot read {}: {e}", path.display())))?;
        Self::from_lexicon_str(&text)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn bos_id(&self) -> u32 {
        self.bos
    }

    pub fn eos_id(&self) -> u32 {
        self.eos
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    /// Split on whitespace, peel edge punctuation, map unknown words to
    /// `<unk>`. No specials are added.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for word in text.split_whitespace() {
            for piece in split_edge_punct(word) {
                ids.push(self.ids.get(piece).copied().unwrap_or(self.unk));
            }
        }
        ids
    }

    /// `<bos>` followed by the encoded text: the canonical model input.
    pub fn encode_with_bos(&self, text: &str) -> Vec<u32> {
        let mut ids = vec![self.bos];
        ids.extend(self.encode(text));
        ids
    }

    /// Join token strings with single spaces. Callers slice off specials
    /// they do not want rendered.
    pub fn decode(&self, ids: &[u32]) -> Result<String, ModelError> {
        let mut parts = Vec::with_capacity(ids.len());
        for &id in ids {
            let token = self.token(id).ok_or(ModelError::TokenOutOfRange {
                id,
                vocab: self.vocab.len() as u32,
            })?;
            parts.push(token);
        }
        Ok(parts.join(" "))
    }
}

/// The encoder's word splitter, exposed so the lexicon generator can
/// enumerate exactly the pieces encoding will produce.
pub fn split_word_pieces(word: &str) -> Vec<&str> {
    split_edge_punct(word)
}

/// Peel [`EDGE_PUNCT`] characters from both edges of a word into standalone
/// pieces, preserving order.
fn split_edge_punct(word: &str) -> Vec<&str> {
    let mut leading = Vec::new();
    let mut rest = word;
    while let Some(c) = rest.chars().next() {
        if EDGE_PUNCT.contains(&c) {
            leading.push(&rest[..c.len_utf8()]);
            rest = &rest[c.len_utf8()..];
        } else {
            break;
        }
    }
    let mut trailing = Vec::new();
    while let Some(c) = rest.chars().last() {
        if EDGE_PUNCT.contains(&c) {
            let cut = rest.len() - c.len_utf8();
            trailing.push(&rest[cut..]);
            rest = &rest[..cut];
        } else {
            break;
        }
    }
    let mut pieces = leading;
    if !rest.is_empty() {
        pieces.push(rest);
    }
    pieces.extend(trailing.into_iter().rev());
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Tokenizer {
        Tokenizer::from_lines(["<bos>", "<eos>", "<unk>", ".", "?", "'", "the", "coin", "Let's",
            "think", "is", "up"])
        .unwrap()
    }

    #[test]
    fn specials_are_required() {
        let err = Tokenizer::from_lines(["<bos>", "<eos>", "a"]).unwrap_err();
        assert!(err.to_string().contains("<unk>"));
    }

    #[test]
    fn duplicate_tokens_rejected() {
        assert!(Tokenizer::from_lines(["<bos>", "<eos>", "<unk>", "a", "a"]).is_err());
    }

    #[test]
    fn words_round_trip_exactly() {
        let tok = toy();
        let text = "the coin is up";
        let ids = tok.encode(text);
        assert_eq!(tok.decode(&ids).unwrap(), text);
    }

    #[test]
    fn edge_punct_is_peeled_interior_kept() {
        let tok = toy();
        let ids = tok.encode("Let's think. up?");
        let tokens: Vec<_> = ids.iter().map(|&i| tok.token(i).unwrap()).collect();
        assert_eq!(tokens, ["Let's", "think", ".", "up", "?"]);
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let tok = toy();
        let ids = tok.encode("the zeppelin is up");
        assert_eq!(ids[1], tok.unk_id());
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn encode_with_bos_prepends() {
        let tok = toy();
        let ids = tok.encode_with_bos("the coin");
        assert_eq!(ids[0], tok.bos_id());
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn ids_are_dense() {
        let tok = toy();
        for id in 0..tok.vocab_size() as u32 {
            assert!(tok.token(id).is_some());
        }
        assert!(tok.token(tok.vocab_size() as u32).is_none());
    }
}
