"""Check by exhaustive enumeration that revealing in descending order of the blue probability is optimal for small
card games, and store the verdicts.
"""

import os

import numpy as np
import pandas as pd

from adapt_gmm.simlab.verifiers import card_game_bruteforce, random_card_game


def main(games: int=200, seed: int=0):
    """Plays random card games with two to six cards.

    Args:
        games (int): Number of random games.
        seed (int): Seed of the game generator.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for game_index in range(games):
        game = random_card_game(int(rng.integers(2, 7)), rng)
        verdict = card_game_bruteforce(game)
        rows.append({"game": game_index, "cards": len(game.q), "optimal": verdict.optimal})

    frame = pd.DataFrame(rows)
    folder = "results/card_game"
    os.makedirs(folder, exist_ok=True)
    frame.to_csv(f"{folder}/verdicts.csv", index=False)
    print(f"Descending order optimal in {frame['optimal'].sum()} of {len(frame)} games.")
    return


if __name__ == "__main__":

    main()
