"""Railway collision detection and max-sum resolution simulator."""
