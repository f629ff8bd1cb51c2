"""Built-in component realizations: the Cahn-Hilliard solver and the data surrogates."""
