# Test package marker for shared helpers imports.
