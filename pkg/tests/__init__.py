# Test suite for the online reconstruction pipeline
