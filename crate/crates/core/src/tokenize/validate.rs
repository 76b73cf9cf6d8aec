//! Token-sequence grammar checks, shared by tests, decoding, and sampling.

use super::{CompoundToken, Stage, TokenType, TokenizeError};

/// Incremental grammar validator.
///
/// The sampler consults [`SequenceValidator::check`] before committing each
/// generated token; tests validate whole sequences via [`validate_sequence`].
#[derive(Debug, Clone)]
pub struct SequenceValidator {
    stage: Stage,
    started: bool,
    finished: bool,
    in_bar: bool,
    last_position: u8,
    /// In the chord stage every beat marker must be followed by one chord.
    awaiting_chord: bool,
    has_position: bool,
}

impl SequenceValidator {
    pub fn new(stage: Stage) -> Self {
        SequenceValidator {
            stage,
            started: false,
            finished: false,
            in_bar: false,
            last_position: 0,
            awaiting_chord: false,
            has_position: false,
        }
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    /// Whether `token` may legally extend the sequence seen so far.
    pub fn check(&self, token: &CompoundToken) -> Result<(), String> {
        if self.finished {
            return Err("token after EOS".into());
        }
        if !self.started {
            return if token.ttype == TokenType::Bos {
                Ok(())
            } else {
                Err("sequence must start with BOS".into())
            };
        }
        if self.awaiting_chord && token.ttype != TokenType::Chord {
            return Err("beat marker must be followed by a chord".into());
        }
        match token.ttype {
            TokenType::Bos => Err("BOS inside sequence".into()),
            TokenType::Pad => Err("PAD inside sequence".into()),
            TokenType::Eos => Ok(()),
            TokenType::Rhythm => {
                let max_pos = self.stage.positions_per_bar();
                match token.barbeat {
                    Some(0) => Ok(()),
                    Some(p) if p >= 1 && p <= max_pos => {
                        if !self.in_bar {
                            return Err("position marker before any bar marker".into());
                        }
                        if p < self.last_position {
                            return Err(format!(
                                "position {p} after position {}",
                                self.last_position
                            ));
                        }
                        // A beat with a chord already emitted cannot repeat.
                        if self.stage == Stage::Chord && p == self.last_position {
                            return Err(format!("duplicate beat marker {p}"));
                        }
                        Ok(())
                    }
                    Some(p) => Err(format!("position {p} exceeds the {max_pos}-slot grid")),
                    None => Err("rhythm token without a barbeat value".into()),
                }
            }
            TokenType::Note => {
                if self.stage == Stage::Chord {
                    return Err("note token in the chord stage".into());
                }
                if !self.has_position {
                    return Err("note before any position marker".into());
                }
                match (token.pitch, token.duration) {
                    (Some(_), Some(_)) => Ok(()),
                    _ => Err("note token without pitch/duration".into()),
                }
            }
            TokenType::Chord => {
                if self.stage != Stage::Chord {
                    return Err("chord token in a note stage".into());
                }
                if !self.awaiting_chord {
                    return Err("chord without a preceding beat marker".into());
                }
                Ok(())
            }
        }
    }

    /// Advances the state. The token must have passed [`Self::check`].
    pub fn push(&mut self, token: &CompoundToken) {
        debug_assert!(self.check(token).is_ok());
        match token.ttype {
            TokenType::Bos => self.started = true,
            TokenType::Eos => self.finished = true,
            TokenType::Rhythm => match token.barbeat {
                Some(0) => {
                    self.in_bar = true;
                    self.last_position = 0;
                    self.has_position = false;
                }
                Some(p) => {
                    self.last_position = p;
                    self.has_position = true;
                    if self.stage == Stage::Chord {
                        self.awaiting_chord = true;
                    }
                }
                None => {}
            },
            TokenType::Chord => self.awaiting_chord = false,
            _ => {}
        }
    }
}

/// Validates a whole sequence, reporting the first offending token index.
pub fn validate_sequence(stage: Stage, tokens: &[CompoundToken]) -> Result<(), TokenizeError> {
    let mut validator = SequenceValidator::new(stage);
    for (index, token) in tokens.iter().enumerate() {
        validator
            .check(token)
            .map_err(|what| TokenizeError::Grammar { index, what })?;
        validator.push(token);
        if validator.finished() {
            // Anything after EOS is a malformed tail.
            if index + 1 != tokens.len() {
                return Err(TokenizeError::Grammar {
                    index: index + 1,
                    what: "token after EOS".into(),
                });
            }
            break;
        }
    }
    Ok(())
}
