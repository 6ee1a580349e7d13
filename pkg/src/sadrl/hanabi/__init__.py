from .engine import (
    COLORS,
    DECK_COUNTS,
    HAND_SIZES,
    MAX_SCORE,
    MAX_STEPS,
    Card,
    HanabiMove,
    HanabiState,
    MoveKind,
    apply_move,
    check_conservation,
    full_deck,
    final_score,
    id_to_move,
    legal_moves,
    load_replay,
    move_to_id,
    new_game,
    num_moves,
    replay_game,
    save_replay,
    state_fingerprint,
)
from .encoding import (
    AUX_CLASSES,
    ENCODER_VERSION,
    AuxClass,
    EncodedObservation,
    HanabiEnv,
    aux_targets,
    encode,
    greedy_slot_onehot,
    layout,
    obs_dim,
    v0_belief,
)

__all__ = [name for name in dir() if not name.startswith("_")]
