# groupreid test suite
