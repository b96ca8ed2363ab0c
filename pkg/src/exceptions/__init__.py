# Exceptions package

