"""Low-memory card dealers, guessers and the structures behind them."""
