//! Dispatch from a game section to a concrete game type.

use std::sync::Arc;

use sdcfr_core::games::{Kuhn, Leduc};
use sdcfr_core::Game;

use crate::config::{GameKind, GameSection};
use crate::error::CliError;

/// Work that is generic over the game being played.
pub trait GameTask {
    type Output;
    fn run<G: Game + 'static>(self, game: Arc<G>) -> Self::Output;
}

pub fn with_game<T: GameTask<Output = Result<R, CliError>>, R>(section: &GameSection, task: T) -> Result<R, CliError> {
    match section.kind {
        GameKind::Kuhn => task.run(Arc::new(Kuhn)),
        GameKind::Leduc => {
            let game = Leduc::new(section.leduc()).map_err(|e| CliError::config("game", e.to_string()))?;
            task.run(Arc::new(game))
        }
    }
}
