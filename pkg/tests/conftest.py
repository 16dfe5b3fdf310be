from hypothesis import settings

# Timing-based flakiness is not what these properties check.
settings.register_profile("extsw", deadline=None)
settings.load_profile("extsw")
