# Configurations package

