# Shared Module 